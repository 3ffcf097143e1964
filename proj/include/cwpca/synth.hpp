#pragma once

#include "cwpca/error.hpp"
#include "cwpca/hsio.hpp"
#include "cwpca/rng.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

namespace cwpca {

/// Latent direction along which a class varies: adds sigma * z * direction.
struct SpectralFactor {
    std::vector<double> direction;
    double sigma = 0.0;
};

struct ClassSpec {
    std::string name;
    std::vector<double> mean;
    /// Multiplies the class's own variation: the factors when given,
    /// otherwise an isotropic unit-variance Gaussian per band.
    double covariance_scale = 0.0;
    double pixel_fraction = 0.0;
    std::vector<SpectralFactor> factors;
};

/// Gaussian-per-class scene. Pixel (class c) =
///   mean_c + covariance_scale_c * variation_c + noise_sigma * n,
/// with n standard normal per band.
struct SceneSpec {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::uint32_t bands = 0;
    std::vector<ClassSpec> classes;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;

    std::vector<std::size_t> class_counts() const {
        const double pixels = static_cast<double>(width) * height;
        std::vector<std::size_t> counts;
        for (const auto& c : classes) counts.push_back(static_cast<std::size_t>(std::llround(c.pixel_fraction * pixels)));
        return counts;
    }

    void validate() const {
        auto fail = [](const std::string& msg) { throw Error(ErrorCode::SpecInvalid, msg); };
        if (width == 0 || height == 0 || bands == 0) fail("scene dimensions must be positive");
        if (classes.empty()) fail("scene needs at least one class");
        if (classes.size() > 65535) fail("too many classes");
        if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) fail("noise_sigma must be >= 0");
        double fraction_sum = 0.0;
        for (std::size_t i = 0; i < classes.size(); ++i) {
            const auto& c = classes[i];
            const std::string who = "class " + std::to_string(i + 1);
            if (c.mean.size() != bands) fail(who + ": mean has " + std::to_string(c.mean.size()) + " entries");
            if (!(c.pixel_fraction >= 0.0)) fail(who + ": negative pixel_fraction");
            if (!(c.covariance_scale >= 0.0)) fail(who + ": negative covariance_scale");
            for (const auto& f : c.factors) {
                if (f.direction.size() != bands) fail(who + ": factor direction length mismatch");
                if (!(f.sigma >= 0.0)) fail(who + ": negative factor sigma");
            }
            fraction_sum += c.pixel_fraction;
        }
        if (fraction_sum > 1.0 + 1e-12) fail("pixel fractions sum to more than 1");
        std::size_t total = 0;
        for (auto n : class_counts()) total += n;
        if (total > std::size_t{width} * height) fail("rounded class counts exceed the pixel count");
    }
};

/// Draw order (documented for reproducibility):
///  1. Rng::stream(seed, 0) shuffles the pixel indices 0..W*H-1; the first
///     count_1 shuffled indices become class 1, the next count_2 class 2, ...
///  2. For class c, Rng::stream(seed, c) generates its pixels in raster order;
///     per pixel: one normal per factor (factor order), or one normal per band
///     when the class has no factors, then one normal per band for noise.
///  3. Unlabeled pixels draw noise only, from Rng::stream(seed, N + 1).
/// Values are accumulated in double and stored as float.
inline std::pair<HyperCube, LabelRaster> generate(const SceneSpec& spec) {
    spec.validate();
    const std::size_t pixels = std::size_t{spec.width} * spec.height;
    const auto counts = spec.class_counts();

    std::vector<std::size_t> order(pixels);
    for (std::size_t i = 0; i < pixels; ++i) order[i] = i;
    auto placement = Rng::stream(spec.seed, 0);
    placement.shuffle(order);

    LabelRaster raster(spec.width, spec.height);
    for (const auto& c : spec.classes) raster.class_names.push_back(c.name.empty() ? "class_" + std::to_string(raster.class_names.size() + 1) : c.name);
    std::size_t next = 0;
    for (std::size_t c = 0; c < spec.classes.size(); ++c) {
        for (std::size_t k = 0; k < counts[c]; ++k) raster.labels[order[next++]] = static_cast<std::uint16_t>(c + 1);
    }

    HyperCube cube(spec.width, spec.height, spec.bands);
    std::vector<double> value(spec.bands);
    const auto n_classes = spec.classes.size();
    for (std::size_t c = 0; c <= n_classes; ++c) {
        auto rng = Rng::stream(spec.seed, c == 0 ? n_classes + 1 : c);
        const ClassSpec* cls = c == 0 ? nullptr : &spec.classes[c - 1];
        for (std::size_t p = 0; p < pixels; ++p) {
            if (raster.labels[p] != c) continue;
            if (cls == nullptr) {
                std::fill(value.begin(), value.end(), 0.0);
            } else {
                value = cls->mean;
                if (!cls->factors.empty()) {
                    for (const auto& f : cls->factors) {
                        const double z = rng.normal() * f.sigma * cls->covariance_scale;
                        for (std::uint32_t b = 0; b < spec.bands; ++b) value[b] += z * f.direction[b];
                    }
                } else {
                    for (std::uint32_t b = 0; b < spec.bands; ++b) value[b] += cls->covariance_scale * rng.normal();
                }
            }
            for (std::uint32_t b = 0; b < spec.bands; ++b) {
                value[b] += spec.noise_sigma * rng.normal();
                cube.data[b * pixels + p] = static_cast<float>(value[b]);
            }
        }
    }
    return {std::move(cube), std::move(raster)};
}

inline SceneSpec scene_spec_from_json(const nlohmann::json& j) {
    try {
        SceneSpec s;
        s.width = j.at("width").get<std::uint32_t>();
        s.height = j.at("height").get<std::uint32_t>();
        s.bands = j.at("bands").get<std::uint32_t>();
        s.noise_sigma = j.value("noise_sigma", 0.0);
        s.seed = j.value("seed", std::uint64_t{0});
        for (const auto& jc : j.at("classes")) {
            ClassSpec c;
            c.name = jc.value("name", std::string{});
            c.mean = jc.at("mean").get<std::vector<double>>();
            c.covariance_scale = jc.value("covariance_scale", 0.0);
            c.pixel_fraction = jc.at("pixel_fraction").get<double>();
            if (jc.contains("factors")) {
                for (const auto& jf : jc.at("factors")) {
                    c.factors.push_back({jf.at("direction").get<std::vector<double>>(), jf.at("sigma").get<double>()});
                }
            }
            s.classes.push_back(std::move(c));
        }
        s.validate();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::SpecInvalid, e.what());
    }
}

inline nlohmann::ordered_json to_json(const SceneSpec& s) {
    nlohmann::ordered_json j;
    j["width"] = s.width;
    j["height"] = s.height;
    j["bands"] = s.bands;
    j["noise_sigma"] = s.noise_sigma;
    j["seed"] = s.seed;
    auto& classes = j["classes"] = nlohmann::ordered_json::array();
    for (const auto& c : s.classes) {
        nlohmann::ordered_json jc;
        jc["name"] = c.name;
        jc["mean"] = c.mean;
        jc["covariance_scale"] = c.covariance_scale;
        jc["pixel_fraction"] = c.pixel_fraction;
        if (!c.factors.empty()) {
            auto& fs = jc["factors"] = nlohmann::ordered_json::array();
            for (const auto& f : c.factors) fs.push_back({{"direction", f.direction}, {"sigma", f.sigma}});
        }
        classes.push_back(std::move(jc));
    }
    return j;
}

inline SceneSpec load_scene_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    try {
        return scene_spec_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::SpecInvalid, path.string() + ": " + e.what());
    }
}

} // namespace cwpca
