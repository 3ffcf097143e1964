#pragma once

#include "cwpca/classifier.hpp"
#include "cwpca/error.hpp"
#include "cwpca/hsio.hpp"
#include "cwpca/metrics.hpp"
#include "cwpca/transforms.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace cwpca {

/// One entry of the method list: "pca:K", "ica:K", "lda:K" or "cwpca:M[:mode]".
struct MethodSpec {
    Method method = Method::PCA;
    int components = 0; // K, or m for CW-PCA
    CwpcaMode mode = CwpcaMode::Masked;

    static MethodSpec parse(const std::string& text) {
        std::vector<std::string> parts;
        std::stringstream ss(text);
        for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
        if (parts.size() < 2 || parts.size() > 3) throw Error(ErrorCode::ConfigInvalid, "bad method '" + text + "'");
        MethodSpec s;
        s.method = method_from_string(parts[0]);
        try {
            std::size_t used = 0;
            s.components = std::stoi(parts[1], &used);
            if (used != parts[1].size()) throw std::invalid_argument(parts[1]);
        } catch (const std::logic_error&) {
            throw Error(ErrorCode::ConfigInvalid, "bad component count in '" + text + "'");
        }
        if (s.components < 1) throw Error(ErrorCode::ConfigInvalid, "component count must be >= 1 in '" + text + "'");
        if (parts.size() == 3) {
            if (s.method != Method::CWPCA) throw Error(ErrorCode::ConfigInvalid, "only cwpca takes a mode: '" + text + "'");
            s.mode = cwpca_mode_from_string(parts[2]);
        }
        return s;
    }

    std::string spec_string() const {
        std::string s = to_string(method) + ':' + std::to_string(components);
        if (method == Method::CWPCA) s += ':' + to_string(mode);
        return s;
    }

    /// Output subdirectory, e.g. "pca-15", "cwpca-1-masked".
    std::string dir_name() const {
        auto s = spec_string();
        for (auto& ch : s)
            if (ch == ':') ch = '-';
        return s;
    }
};

struct ClassifierSettings {
    std::vector<int> hidden{64, 32};
    Activation activation = Activation::Relu;
    double learning_rate = 0.01;
    int epochs = 90;
    int batch_size = 64;
    std::uint64_t seed = 0;
    double validation_fraction = 0.1;

    MlpConfig for_shape(int features, int classes) const {
        MlpConfig c;
        c.layer_sizes.push_back(features);
        c.layer_sizes.insert(c.layer_sizes.end(), hidden.begin(), hidden.end());
        c.layer_sizes.push_back(classes);
        c.activation = activation;
        c.learning_rate = learning_rate;
        c.epochs = epochs;
        c.batch_size = batch_size;
        c.seed = seed;
        c.validation_fraction = validation_fraction;
        return c;
    }
};

struct PipelineConfig {
    std::filesystem::path cube_path;
    std::filesystem::path labels_path;
    double train_fraction = 0.7;
    std::uint64_t split_seed = 0;
    std::vector<MethodSpec> methods;
    ClassifierSettings classifier;
    std::uint64_t ica_seed = 0;
    double weak_threshold = 0.01;
    bool reference_table = false;
    std::filesystem::path output_dir = "out";

    void validate() const {
        if (methods.empty()) throw Error(ErrorCode::ConfigInvalid, "no methods configured");
        if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw Error(ErrorCode::ConfigInvalid, "split.train_fraction must lie in (0, 1)");
        if (!(weak_threshold > 0.0 && weak_threshold < 1.0)) throw Error(ErrorCode::ConfigInvalid, "weak_threshold must lie in (0, 1)");
        for (int h : classifier.hidden)
            if (h < 1) throw Error(ErrorCode::ConfigInvalid, "hidden layer sizes must be positive");
        for (std::size_t i = 0; i < methods.size(); ++i)
            for (std::size_t j = i + 1; j < methods.size(); ++j)
                if (methods[i].dir_name() == methods[j].dir_name()) {
                    throw Error(ErrorCode::ConfigInvalid, "duplicate method " + methods[i].spec_string());
                }
    }
};

/// Reads a JSON config. Keys missing from the file keep the values already in
/// `base`, so callers can layer defaults < file < command-line flags.
inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j, PipelineConfig base = {}) {
    try {
        if (j.contains("cube")) base.cube_path = j.at("cube").get<std::string>();
        if (j.contains("labels")) base.labels_path = j.at("labels").get<std::string>();
        if (j.contains("output_dir")) base.output_dir = j.at("output_dir").get<std::string>();
        if (j.contains("split")) {
            const auto& s = j.at("split");
            base.train_fraction = s.value("train_fraction", base.train_fraction);
            base.split_seed = s.value("seed", base.split_seed);
        }
        if (j.contains("methods")) {
            base.methods.clear();
            for (const auto& m : j.at("methods")) base.methods.push_back(MethodSpec::parse(m.get<std::string>()));
        }
        if (j.contains("classifier")) {
            const auto& c = j.at("classifier");
            auto& k = base.classifier;
            k.hidden = c.value("hidden", k.hidden);
            if (c.contains("activation")) k.activation = activation_from_string(c.at("activation").get<std::string>());
            k.learning_rate = c.value("learning_rate", k.learning_rate);
            k.epochs = c.value("epochs", k.epochs);
            k.batch_size = c.value("batch_size", k.batch_size);
            k.seed = c.value("seed", k.seed);
            k.validation_fraction = c.value("validation_fraction", k.validation_fraction);
        }
        base.ica_seed = j.value("ica_seed", base.ica_seed);
        base.weak_threshold = j.value("weak_threshold", base.weak_threshold);
        base.reference_table = j.value("reference_table", base.reference_table);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ConfigInvalid, e.what());
    }
    return base;
}

inline PipelineConfig load_pipeline_config(const std::filesystem::path& path, PipelineConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    try {
        return pipeline_config_from_json(nlohmann::json::parse(in), std::move(base));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::ConfigInvalid, path.string() + ": " + e.what());
    }
}

/// 64-bit FNV-1a, hex encoded.
inline std::string digest(const std::string& text) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001B3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Single method: fit -> transform -> train -> evaluate

inline LinearTransform fit_method(const MethodSpec& spec, const HyperCube& cube, const LabelRaster& raster,
                                  const SplitAssignment& split, std::uint64_t ica_seed) {
    if (spec.method == Method::CWPCA) return fit_cwpca(cube, raster, split, spec.components, spec.mode);
    const auto train = cube_to_samples(cube, raster, SampleSubset::Train, &split);
    if (train.size() == 0) throw Error(ErrorCode::EmptyInput, "no training pixels");
    switch (spec.method) {
    case Method::PCA: return fit_pca(train.features, spec.components);
    case Method::ICA: return fit_ica(train.features, spec.components, ica_seed);
    case Method::LDA: return fit_lda(train.features, train.labels, spec.components);
    case Method::CWPCA: break;
    }
    throw Error(ErrorCode::ConfigInvalid, "unhandled method");
}

struct MethodRun {
    MethodSpec spec;
    LinearTransform transform;
    HyperCube reduced;
    TrainedModel model;
    EvalReport report;
};

inline TrainedModel train_on_split(const HyperCube& reduced, const LabelRaster& raster, const SplitAssignment& split,
                                   const ClassifierSettings& settings) {
    const auto train_set = cube_to_samples(reduced, raster, SampleSubset::Train, &split);
    const auto cfg = settings.for_shape(static_cast<int>(reduced.bands), raster.class_count());
    return train(train_set.features, train_set.labels, cfg);
}

inline nlohmann::ordered_json run_metadata(const MethodSpec& spec, const SplitAssignment& split, const MlpConfig& cfg,
                                           std::uint64_t ica_seed, const LinearTransform& t) {
    nlohmann::ordered_json meta;
    meta["method_spec"] = spec.spec_string();
    meta["split"] = {{"train_fraction", split.train_fraction},
                     {"seed", split.seed},
                     {"n_train", split.count(Partition::Train)},
                     {"n_test", split.count(Partition::Test)}};
    meta["classifier"] = to_json(cfg);
    if (spec.method == Method::ICA) {
        meta["ica"] = {{"seed", ica_seed}, {"iterations", t.iterations}, {"converged", t.converged}};
    }
    meta["output_bands"] = t.output_bands();
    meta["config_digest"] = digest(meta.dump());
    return meta;
}

inline EvalReport evaluate_on_split(const TrainedModel& model, const HyperCube& reduced, const LabelRaster& raster,
                                    const SplitAssignment& split) {
    const auto test_set = cube_to_samples(reduced, raster, SampleSubset::Test, &split);
    if (test_set.size() == 0) throw Error(ErrorCode::EmptyInput, "no test pixels");
    const auto pred = predict(model, test_set.features);
    auto report = evaluate(test_set.labels, pred.labels, raster.class_count());
    report.class_names = raster.class_names;
    return report;
}

inline MethodRun run_method(const MethodSpec& spec, const HyperCube& cube, const LabelRaster& raster,
                            const SplitAssignment& split, const PipelineConfig& config) {
    MethodRun run;
    run.spec = spec;
    run.transform = fit_method(spec, cube, raster, split, config.ica_seed);
    run.reduced = apply(run.transform, cube);
    run.model = train_on_split(run.reduced, raster, split, config.classifier);
    run.report = evaluate_on_split(run.model, run.reduced, raster, split);
    run.report.method = spec.spec_string();
    run.report.weak_class_ids = weak_classes(raster, config.weak_threshold);
    run.report.metadata = run_metadata(spec, split, run.model.config, config.ica_seed, run.transform);
    return run;
}

// ---------------------------------------------------------------------------
// Combined tables

/// Published OA/AA (percent) on Indian Pines, keyed by method family.
inline std::optional<std::pair<double, double>> reference_scores(Method m) {
    switch (m) {
    case Method::ICA: return std::pair{89.43, 81.48};
    case Method::PCA: return std::pair{91.53, 84.79};
    case Method::LDA: return std::pair{96.43, 90.12};
    case Method::CWPCA: return std::pair{99.95, 99.82};
    }
    return std::nullopt;
}

struct MethodStatus {
    std::string method;
    bool ok = false;
    std::string error;
    std::optional<EvalReport> report;
};

/// method,status,oa,aa[,reference_oa,reference_aa],acc_1..acc_N
inline std::string comparison_csv(const std::vector<MethodStatus>& rows, int n_classes, bool with_reference) {
    std::string out = "method,status,oa,aa";
    if (with_reference) out += ",reference_oa,reference_aa";
    for (int c = 1; c <= n_classes; ++c) out += ",acc_" + std::to_string(c);
    out += '\n';
    for (const auto& r : rows) {
        out += r.method + ',' + (r.ok ? "ok" : "failed");
        if (r.ok) {
            out += ',' + detail::fixed(r.report->overall_accuracy) + ',' + detail::fixed(r.report->average_accuracy);
        } else {
            out += ",,";
        }
        if (with_reference) {
            const auto ref = reference_scores(MethodSpec::parse(r.method).method);
            out += ',' + detail::fixed(ref->first / 100.0) + ',' + detail::fixed(ref->second / 100.0);
        }
        for (int c = 1; c <= n_classes; ++c) {
            out += ',';
            if (r.ok && static_cast<std::size_t>(c) <= r.report->per_class_accuracy.size()) {
                out += detail::fixed(r.report->per_class_accuracy[static_cast<std::size_t>(c - 1)]);
            }
        }
        out += '\n';
    }
    return out;
}

/// Rows are the weak classes of `raster`, columns the reports' methods,
/// cells per-class accuracy.
inline std::string report_weak_classes(const std::vector<EvalReport>& reports, const LabelRaster& raster,
                                       double threshold = 0.01) {
    if (reports.empty()) throw Error(ErrorCode::EmptyInput, "no reports");
    const auto weak = weak_classes(raster, threshold);
    std::string out = "class_id,name";
    for (const auto& r : reports) out += ',' + detail::csv_escape(r.method);
    out += '\n';
    if (weak.empty()) {
        out += "# no class holds less than " + detail::fixed(threshold * 100.0, 2) + "% of labeled pixels\n";
        return out;
    }
    for (int c : weak) {
        out += std::to_string(c) + ',' + detail::csv_escape(raster.class_name(c));
        for (const auto& r : reports) {
            out += ',';
            if (static_cast<std::size_t>(c) <= r.per_class_accuracy.size()) {
                out += detail::fixed(r.per_class_accuracy[static_cast<std::size_t>(c - 1)]);
            }
        }
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Whole pipeline

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << text;
}

struct PipelineResult {
    std::vector<MethodStatus> methods;
    int exit_code = 0; // 0 all ok, 2 some method failed
};

/// Runs every configured method and writes, under output_dir:
///   <method>/transform.hsdt, reduced.hsdr, model.hsdm, history.csv,
///   report.json, per_class.csv; plus comparison.csv, weak_classes.csv and
///   summary.json at the top level. A failing method is recorded and skipped.
inline PipelineResult run_pipeline(const PipelineConfig& config, const HyperCube& cube, const LabelRaster& raster) {
    config.validate();
    require_aligned(cube, raster);
    const auto split = stratified_split(raster, config.train_fraction, config.split_seed);

    std::error_code ec;
    std::filesystem::create_directories(config.output_dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + config.output_dir.string());
    save_split(split, config.output_dir / "split.json");

    PipelineResult result;
    std::vector<EvalReport> reports;
    for (const auto& spec : config.methods) {
        MethodStatus status;
        status.method = spec.spec_string();
        try {
            const auto run = run_method(spec, cube, raster, split, config);
            const auto dir = config.output_dir / spec.dir_name();
            std::filesystem::create_directories(dir);
            save_transform(run.transform, dir / "transform.hsdt");
            save_cube(run.reduced, dir / "reduced.hsdr");
            save_model(run.model, dir / "model.hsdm");
            write_text(dir / "history.csv", history_csv(run.model));
            write_text(dir / "report.json", to_json(run.report).dump(2) + '\n');
            write_text(dir / "per_class.csv", per_class_csv(run.report));
            status.ok = true;
            status.report = run.report;
            reports.push_back(run.report);
        } catch (const std::exception& e) {
            status.error = e.what();
            result.exit_code = 2;
        }
        result.methods.push_back(std::move(status));
    }

    write_text(config.output_dir / "comparison.csv",
               comparison_csv(result.methods, raster.class_count(), config.reference_table));
    if (!reports.empty()) {
        write_text(config.output_dir / "weak_classes.csv", report_weak_classes(reports, raster, config.weak_threshold));
    }
    nlohmann::ordered_json summary;
    summary["split"] = {{"train_fraction", config.train_fraction}, {"seed", config.split_seed}};
    summary["classifier"] = to_json(config.classifier.for_shape(0, raster.class_count()));
    summary["classifier"].erase("layer_sizes");
    summary["classifier"]["hidden"] = config.classifier.hidden;
    summary["weak_threshold"] = config.weak_threshold;
    auto& methods = summary["methods"] = nlohmann::ordered_json::array();
    for (const auto& m : result.methods) {
        nlohmann::ordered_json e;
        e["method"] = m.method;
        e["status"] = m.ok ? "ok" : "failed";
        if (m.ok) {
            e["overall_accuracy"] = m.report->overall_accuracy;
            e["average_accuracy"] = m.report->average_accuracy;
        } else {
            e["error"] = m.error;
        }
        methods.push_back(std::move(e));
    }
    write_text(config.output_dir / "summary.json", summary.dump(2) + '\n');
    return result;
}

inline PipelineResult run_pipeline(const PipelineConfig& config) {
    config.validate();
    const auto cube = load_cube(config.cube_path);
    const auto raster = load_labels(config.labels_path);
    return run_pipeline(config, cube, raster);
}

} // namespace cwpca
