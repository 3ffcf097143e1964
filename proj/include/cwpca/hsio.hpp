#pragma once

#include "cwpca/error.hpp"
#include "cwpca/linalg.hpp"
#include "cwpca/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace cwpca {

/// Spectral image stored band-sequential: element (band, row, col) lives at
/// ((band * height + row) * width + col).
struct HyperCube {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::uint32_t bands = 0;
    std::vector<float> data;

    HyperCube() = default;
    HyperCube(std::uint32_t w, std::uint32_t h, std::uint32_t b)
        : width(w), height(h), bands(b), data(std::size_t{w} * h * b, 0.0f) {}

    std::size_t pixel_count() const { return std::size_t{width} * height; }

    std::size_t offset(std::uint32_t band, std::uint32_t row, std::uint32_t col) const {
        return (std::size_t{band} * height + row) * width + col;
    }
    float& at(std::uint32_t band, std::uint32_t row, std::uint32_t col) {
        return data[offset(band, row, col)];
    }
    float at(std::uint32_t band, std::uint32_t row, std::uint32_t col) const {
        return data[offset(band, row, col)];
    }

    void validate() const {
        if (width == 0 || height == 0 || bands == 0) {
            throw Error(ErrorCode::DimensionMismatch, "cube dimensions must be positive");
        }
        if (data.size() != pixel_count() * bands) {
            throw Error(ErrorCode::DimensionMismatch, "cube payload does not match width*height*bands");
        }
        for (float v : data) {
            if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "cube contains NaN or Inf");
        }
    }

    bool operator==(const HyperCube&) const = default;
};

/// Per-pixel class ids; 0 is unlabeled, classes are 1..N.
struct LabelRaster {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<std::uint16_t> labels;   // row-major
    std::vector<std::string> class_names; // entry c-1 names class c; may be empty

    LabelRaster() = default;
    LabelRaster(std::uint32_t w, std::uint32_t h)
        : width(w), height(h), labels(std::size_t{w} * h, 0) {}

    std::size_t pixel_count() const { return std::size_t{width} * height; }
    std::uint16_t& at(std::uint32_t row, std::uint32_t col) { return labels[std::size_t{row} * width + col]; }
    std::uint16_t at(std::uint32_t row, std::uint32_t col) const { return labels[std::size_t{row} * width + col]; }

    int class_count() const {
        std::uint16_t top = 0;
        for (auto l : labels) top = std::max(top, l);
        return top;
    }

    std::vector<std::size_t> class_histogram() const {
        std::vector<std::size_t> counts(static_cast<std::size_t>(class_count()) + 1, 0);
        for (auto l : labels) ++counts[l];
        return counts;
    }

    std::string class_name(int c) const {
        if (c >= 1 && static_cast<std::size_t>(c) <= class_names.size()) return class_names[c - 1];
        return "class_" + std::to_string(c);
    }

    bool operator==(const LabelRaster&) const = default;
};

inline void require_aligned(const HyperCube& cube, const LabelRaster& raster) {
    if (cube.width != raster.width || cube.height != raster.height) {
        throw Error(ErrorCode::DimensionMismatch,
                    "cube is " + std::to_string(cube.width) + "x" + std::to_string(cube.height) +
                        " but labels are " + std::to_string(raster.width) + "x" + std::to_string(raster.height));
    }
}

// ---------------------------------------------------------------------------
// HSDR container

namespace hsdr {

inline constexpr std::array<char, 4> kMagic{'H', 'S', 'D', 'R'};
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::uint8_t kKindCube = 1;
inline constexpr std::uint8_t kKindLabels = 2;
inline constexpr std::size_t kHeaderSize = 4 + 1 + 1 + 4 + 4 + 4;

struct Header {
    std::uint8_t kind = 0;
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::uint32_t bands = 0;
};

template <typename T>
T to_little_endian(T value) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(value);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    }
    return value;
}

template <typename T>
void write_le(std::ostream& out, T value) {
    const T le = to_little_endian(value);
    out.write(reinterpret_cast<const char*>(&le), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
    T raw{};
    in.read(reinterpret_cast<char*>(&raw), sizeof(T));
    return to_little_endian(raw);
}

template <typename T>
void write_array_le(std::ostream& out, const std::vector<T>& values) {
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size() * sizeof(T)));
    } else {
        for (const T& v : values) write_le(out, v);
    }
}

template <typename T>
std::vector<T> read_array_le(std::istream& in, std::size_t count) {
    std::vector<T> values(count);
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * sizeof(T)));
    if (static_cast<std::size_t>(in.gcount()) != count * sizeof(T)) {
        throw Error(ErrorCode::DimensionMismatch,
                    "payload holds " + std::to_string(in.gcount()) + " bytes, header declares " +
                        std::to_string(count * sizeof(T)));
    }
    if constexpr (std::endian::native == std::endian::big) {
        for (T& v : values) v = to_little_endian(v);
    }
    return values;
}

inline std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    return out;
}

inline std::ifstream open_for_read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    return in;
}

inline void write_header(std::ostream& out, const Header& h) {
    out.write(kMagic.data(), kMagic.size());
    write_le<std::uint8_t>(out, kVersion);
    write_le<std::uint8_t>(out, h.kind);
    write_le<std::uint32_t>(out, h.width);
    write_le<std::uint32_t>(out, h.height);
    write_le<std::uint32_t>(out, h.bands);
}

inline Header read_header(std::istream& in, std::uint8_t expected_kind, const std::string& name) {
    std::array<char, 4> magic{};
    in.read(magic.data(), magic.size());
    if (in.gcount() != 4 || magic != kMagic) throw Error(ErrorCode::FormatError, name + ": bad magic");
    const auto version = read_le<std::uint8_t>(in);
    Header h;
    h.kind = read_le<std::uint8_t>(in);
    h.width = read_le<std::uint32_t>(in);
    h.height = read_le<std::uint32_t>(in);
    h.bands = read_le<std::uint32_t>(in);
    if (!in) throw Error(ErrorCode::FormatError, name + ": truncated header");
    if (version != kVersion) {
        throw Error(ErrorCode::FormatError, name + ": unsupported version " + std::to_string(version));
    }
    if (h.kind != expected_kind) {
        throw Error(ErrorCode::FormatError, name + ": payload kind " + std::to_string(h.kind) +
                                                 ", expected " + std::to_string(expected_kind));
    }
    if (h.width == 0 || h.height == 0 || h.bands == 0) {
        throw Error(ErrorCode::FormatError, name + ": zero dimension in header");
    }
    if (expected_kind == kKindLabels && h.bands != 1) {
        throw Error(ErrorCode::FormatError, name + ": label payload must have 1 band");
    }
    return h;
}

inline void expect_eof(std::istream& in, const std::string& name) {
    if (in.peek() != std::char_traits<char>::eof()) {
        throw Error(ErrorCode::DimensionMismatch, name + ": trailing bytes after payload");
    }
}

inline std::filesystem::path names_path(const std::filesystem::path& labels_path) {
    auto p = labels_path;
    p += ".names";
    return p;
}

} // namespace hsdr

inline void save_cube(const HyperCube& cube, const std::filesystem::path& path) {
    cube.validate();
    auto out = hsdr::open_for_write(path);
    hsdr::write_header(out, {hsdr::kKindCube, cube.width, cube.height, cube.bands});
    hsdr::write_array_le(out, cube.data);
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

inline HyperCube load_cube(const std::filesystem::path& path) {
    auto in = hsdr::open_for_read(path);
    const auto h = hsdr::read_header(in, hsdr::kKindCube, path.string());
    HyperCube cube;
    cube.width = h.width;
    cube.height = h.height;
    cube.bands = h.bands;
    cube.data = hsdr::read_array_le<float>(in, std::size_t{h.width} * h.height * h.bands);
    hsdr::expect_eof(in, path.string());
    cube.validate();
    return cube;
}

/// Labels go to an HSDR file; class names, when present, to a sidecar
/// `<path>.names` text file with one name per line.
inline void save_labels(const LabelRaster& raster, const std::filesystem::path& path) {
    if (raster.labels.size() != raster.pixel_count() || raster.pixel_count() == 0) {
        throw Error(ErrorCode::DimensionMismatch, "label raster size does not match its dimensions");
    }
    {
        auto out = hsdr::open_for_write(path);
        hsdr::write_header(out, {hsdr::kKindLabels, raster.width, raster.height, 1});
        hsdr::write_array_le(out, raster.labels);
        if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
    }
    const auto names = hsdr::names_path(path);
    if (raster.class_names.empty()) {
        std::error_code ec;
        std::filesystem::remove(names, ec);
        return;
    }
    std::ofstream out(names, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + names.string());
    for (const auto& n : raster.class_names) out << n << '\n';
}

inline LabelRaster load_labels(const std::filesystem::path& path) {
    auto in = hsdr::open_for_read(path);
    const auto h = hsdr::read_header(in, hsdr::kKindLabels, path.string());
    LabelRaster raster;
    raster.width = h.width;
    raster.height = h.height;
    raster.labels = hsdr::read_array_le<std::uint16_t>(in, std::size_t{h.width} * h.height);
    hsdr::expect_eof(in, path.string());
    std::ifstream names(hsdr::names_path(path));
    for (std::string line; std::getline(names, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        raster.class_names.push_back(line);
    }
    return raster;
}

// ---------------------------------------------------------------------------
// Train/test split

enum class Partition : std::uint8_t { None = 0, Train = 1, Test = 2 };

struct SplitAssignment {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<Partition> assignment; // row-major, one entry per pixel
    std::uint64_t seed = 0;
    double train_fraction = 0.0;

    std::size_t count(Partition p) const {
        return static_cast<std::size_t>(std::count(assignment.begin(), assignment.end(), p));
    }

    bool operator==(const SplitAssignment&) const = default;
};

/// Number of pixels a class of `total` puts into the first partition:
/// round(fraction * total), at least 1 once the class has 2 pixels.
inline std::size_t stratified_take(std::size_t total, double fraction) {
    auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
    if (total >= 2 && take == 0) take = 1;
    return std::min(take, total);
}

/// Per class c (ascending), the class's pixel indices in raster order are
/// shuffled with `Rng::stream(seed, c)` and the first stratified_take()
/// become train.
inline SplitAssignment stratified_split(const LabelRaster& raster, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw Error(ErrorCode::ConfigInvalid, "train_fraction must lie in (0, 1)");
    }
    const int n_classes = raster.class_count();
    if (n_classes == 0) throw Error(ErrorCode::EmptyClass, "raster has no labeled pixels");

    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(n_classes) + 1);
    for (std::size_t i = 0; i < raster.labels.size(); ++i) {
        if (raster.labels[i] != 0) members[raster.labels[i]].push_back(i);
    }

    SplitAssignment split;
    split.width = raster.width;
    split.height = raster.height;
    split.seed = seed;
    split.train_fraction = train_fraction;
    split.assignment.assign(raster.pixel_count(), Partition::None);
    for (int c = 1; c <= n_classes; ++c) {
        auto& idx = members[static_cast<std::size_t>(c)];
        if (idx.empty()) throw Error(ErrorCode::EmptyClass, "class " + std::to_string(c) + " has no pixels");
        auto rng = Rng::stream(seed, static_cast<std::uint64_t>(c));
        rng.shuffle(idx);
        const auto n_train = stratified_take(idx.size(), train_fraction);
        for (std::size_t k = 0; k < idx.size(); ++k) {
            split.assignment[idx[k]] = k < n_train ? Partition::Train : Partition::Test;
        }
    }
    return split;
}

inline void save_split(const SplitAssignment& split, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["format"] = "hsdr-split";
    j["version"] = 1;
    j["width"] = split.width;
    j["height"] = split.height;
    j["seed"] = split.seed;
    j["train_fraction"] = split.train_fraction;
    std::string mask(split.assignment.size(), '.');
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (split.assignment[i] == Partition::Train) mask[i] = 'T';
        if (split.assignment[i] == Partition::Test) mask[i] = 'E';
    }
    j["mask"] = mask;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    out << j.dump() << '\n';
}

inline SplitAssignment load_split(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
        SplitAssignment split;
        split.width = j.at("width").get<std::uint32_t>();
        split.height = j.at("height").get<std::uint32_t>();
        split.seed = j.at("seed").get<std::uint64_t>();
        split.train_fraction = j.at("train_fraction").get<double>();
        const auto mask = j.at("mask").get<std::string>();
        if (mask.size() != std::size_t{split.width} * split.height) {
            throw Error(ErrorCode::DimensionMismatch, path.string() + ": mask length mismatch");
        }
        split.assignment.resize(mask.size());
        for (std::size_t i = 0; i < mask.size(); ++i) {
            switch (mask[i]) {
            case '.': split.assignment[i] = Partition::None; break;
            case 'T': split.assignment[i] = Partition::Train; break;
            case 'E': split.assignment[i] = Partition::Test; break;
            default: throw Error(ErrorCode::FormatError, path.string() + ": bad mask character");
            }
        }
        return split;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::FormatError, path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Pixel extraction

enum class SampleSubset { Train, Test, AllLabeled };

struct PixelCoord {
    std::uint32_t row = 0;
    std::uint32_t col = 0;
    bool operator==(const PixelCoord&) const = default;
};

/// Rows of `features` are pixel spectra in raster scan order.
struct Samples {
    Matrix features;
    std::vector<int> labels;
    std::vector<PixelCoord> coords;

    Eigen::Index size() const { return features.rows(); }
};

inline Samples cube_to_samples(const HyperCube& cube, const LabelRaster& raster, SampleSubset subset,
                               const SplitAssignment* split = nullptr) {
    require_aligned(cube, raster);
    if (subset != SampleSubset::AllLabeled) {
        if (split == nullptr) throw Error(ErrorCode::ConfigInvalid, "train/test subset needs a split");
        if (split->width != raster.width || split->height != raster.height ||
            split->assignment.size() != raster.pixel_count()) {
            throw Error(ErrorCode::DimensionMismatch, "split does not match raster dimensions");
        }
    }
    const Partition wanted = subset == SampleSubset::Train ? Partition::Train : Partition::Test;

    std::vector<std::size_t> picked;
    for (std::size_t i = 0; i < raster.labels.size(); ++i) {
        if (raster.labels[i] == 0) continue;
        if (subset != SampleSubset::AllLabeled && split->assignment[i] != wanted) continue;
        picked.push_back(i);
    }

    Samples s;
    const auto m = static_cast<Eigen::Index>(picked.size());
    s.features.resize(m, cube.bands);
    s.labels.reserve(picked.size());
    s.coords.reserve(picked.size());
    const std::size_t plane = cube.pixel_count();
    for (Eigen::Index r = 0; r < m; ++r) {
        const std::size_t p = picked[static_cast<std::size_t>(r)];
        for (std::uint32_t b = 0; b < cube.bands; ++b) {
            s.features(r, b) = cube.data[b * plane + p];
        }
        s.labels.push_back(raster.labels[p]);
        s.coords.push_back({static_cast<std::uint32_t>(p / cube.width), static_cast<std::uint32_t>(p % cube.width)});
    }
    return s;
}

/// Every pixel of the cube as an (width*height) x bands matrix, raster order.
inline Matrix cube_pixels(const HyperCube& cube) {
    const std::size_t plane = cube.pixel_count();
    Matrix out(static_cast<Eigen::Index>(plane), cube.bands);
    for (std::uint32_t b = 0; b < cube.bands; ++b) {
        for (std::size_t p = 0; p < plane; ++p) out(static_cast<Eigen::Index>(p), b) = cube.data[b * plane + p];
    }
    return out;
}

inline HyperCube pixels_to_cube(const Matrix& pixels, std::uint32_t width, std::uint32_t height) {
    if (static_cast<std::size_t>(pixels.rows()) != std::size_t{width} * height) {
        throw Error(ErrorCode::DimensionMismatch, "pixel count does not match spatial dimensions");
    }
    HyperCube cube(width, height, static_cast<std::uint32_t>(pixels.cols()));
    const std::size_t plane = cube.pixel_count();
    for (std::uint32_t b = 0; b < cube.bands; ++b) {
        for (std::size_t p = 0; p < plane; ++p) {
            cube.data[b * plane + p] = static_cast<float>(pixels(static_cast<Eigen::Index>(p), b));
        }
    }
    return cube;
}

// ---------------------------------------------------------------------------
// CSV ingestion

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string{} : field.substr(b, e - b + 1));
    }
    return out;
}

template <typename T>
bool parse_number(const std::string& s, T& value) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    return ec == std::errc{} && ptr == last;
}

/// Numeric rows of a CSV file. A first line that does not parse is treated
/// as a header and skipped; blank lines are ignored.
template <typename T>
std::vector<std::vector<T>> read_numeric_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::vector<std::vector<T>> rows;
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<T> row;
        bool ok = true;
        for (const auto& f : split_fields(line)) {
            T v{};
            if (!parse_number(f, v)) {
                ok = false;
                break;
            }
            row.push_back(v);
        }
        if (!ok) {
            if (rows.empty() && line_no == 1) continue;
            throw Error(ErrorCode::FormatError, path.string() + ":" + std::to_string(line_no) + ": not numeric");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace detail

/// Reads a label grid CSV (height rows of width integers) and a spectra CSV
/// with one row of `bands` values per pixel, pixels in row-major order.
inline std::pair<HyperCube, LabelRaster> read_csv_scene(const std::filesystem::path& spectra_csv,
                                                        const std::filesystem::path& labels_csv) {
    const auto grid = detail::read_numeric_csv<long>(labels_csv);
    if (grid.empty() || grid.front().empty()) throw Error(ErrorCode::FormatError, "empty label CSV");
    const auto width = static_cast<std::uint32_t>(grid.front().size());
    const auto height = static_cast<std::uint32_t>(grid.size());
    LabelRaster raster(width, height);
    for (std::uint32_t r = 0; r < height; ++r) {
        if (grid[r].size() != width) throw Error(ErrorCode::DimensionMismatch, "ragged label CSV row " + std::to_string(r));
        for (std::uint32_t c = 0; c < width; ++c) {
            const long v = grid[r][c];
            if (v < 0 || v > 65535) throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(v));
            raster.at(r, c) = static_cast<std::uint16_t>(v);
        }
    }

    const auto spectra = detail::read_numeric_csv<float>(spectra_csv);
    if (spectra.size() != raster.pixel_count()) {
        throw Error(ErrorCode::DimensionMismatch, "spectra CSV has " + std::to_string(spectra.size()) +
                                                      " rows, label grid has " + std::to_string(raster.pixel_count()) +
                                                      " pixels");
    }
    const auto bands = static_cast<std::uint32_t>(spectra.front().size());
    HyperCube cube(width, height, bands);
    for (std::size_t p = 0; p < spectra.size(); ++p) {
        if (spectra[p].size() != bands) throw Error(ErrorCode::DimensionMismatch, "ragged spectra row " + std::to_string(p));
        for (std::uint32_t b = 0; b < bands; ++b) cube.data[b * cube.pixel_count() + p] = spectra[p][b];
    }
    cube.validate();
    return {std::move(cube), std::move(raster)};
}

} // namespace cwpca
