#include "cwpca/cwpca.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace cwpca;

namespace {

/// Classifier and split flags shared by `train` and `run`; unset flags leave
/// the config (or defaults) alone.
struct OverrideFlags {
    std::optional<double> train_fraction;
    std::optional<std::uint64_t> split_seed;
    std::optional<std::vector<int>> hidden;
    std::optional<std::string> activation;
    std::optional<double> learning_rate;
    std::optional<int> epochs;
    std::optional<int> batch_size;
    std::optional<std::uint64_t> seed;
    std::optional<double> validation_fraction;
    std::optional<std::uint64_t> ica_seed;
    std::optional<double> weak_threshold;

    void add_classifier(CLI::App* app) {
        app->add_option("--hidden", hidden, "hidden layer sizes")->delimiter(',');
        app->add_option("--activation", activation, "relu or tanh");
        app->add_option("--learning-rate", learning_rate);
        app->add_option("--epochs", epochs);
        app->add_option("--batch-size", batch_size);
        app->add_option("--seed", seed, "classifier seed");
        app->add_option("--validation-fraction", validation_fraction);
    }

    void add_pipeline(CLI::App* app) {
        app->add_option("--train-fraction", train_fraction);
        app->add_option("--split-seed", split_seed);
        app->add_option("--ica-seed", ica_seed);
        app->add_option("--weak-threshold", weak_threshold);
    }

    void apply(PipelineConfig& c) const {
        if (train_fraction) c.train_fraction = *train_fraction;
        if (split_seed) c.split_seed = *split_seed;
        if (hidden) c.classifier.hidden = *hidden;
        if (activation) c.classifier.activation = activation_from_string(*activation);
        if (learning_rate) c.classifier.learning_rate = *learning_rate;
        if (epochs) c.classifier.epochs = *epochs;
        if (batch_size) c.classifier.batch_size = *batch_size;
        if (seed) c.classifier.seed = *seed;
        if (validation_fraction) c.classifier.validation_fraction = *validation_fraction;
        if (ica_seed) c.ica_seed = *ica_seed;
        if (weak_threshold) c.weak_threshold = *weak_threshold;
    }
};

PipelineConfig layered_config(const std::string& config_path, const OverrideFlags& flags) {
    PipelineConfig cfg;
    if (!config_path.empty()) cfg = load_pipeline_config(config_path, cfg);
    flags.apply(cfg);
    return cfg;
}

void ensure_parent(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hyperspectral dimensionality reduction toolkit (PCA, ICA, LDA, class-wise PCA)"};
    app.require_subcommand(1);

    // convert
    std::string csv_input, csv_labels, csv_names, out_dir;
    auto* convert = app.add_subcommand("convert", "Convert CSV exports into HSDR cube and label files");
    convert->add_option("--input", csv_input, "spectra CSV, one row per pixel in row-major order")->required();
    convert->add_option("--labels", csv_labels, "label grid CSV, one row per image row")->required();
    convert->add_option("--names", csv_names, "text file with one class name per line");
    convert->add_option("--output", out_dir, "output directory")->required();

    // generate
    std::string scene_config;
    std::optional<std::uint64_t> scene_seed;
    auto* gen = app.add_subcommand("generate", "Generate a synthetic scene from a JSON scene spec");
    gen->add_option("--config", scene_config)->required();
    gen->add_option("--seed", scene_seed, "override the spec seed");
    gen->add_option("--output", out_dir)->required();

    // split
    std::string labels_path, split_path, output;
    double split_fraction = 0.7;
    std::uint64_t split_seed = 0;
    auto* split_cmd = app.add_subcommand("split", "Stratified train/test split of the labeled pixels");
    split_cmd->add_option("--labels", labels_path)->required();
    split_cmd->add_option("--train-fraction", split_fraction);
    split_cmd->add_option("--seed", split_seed);
    split_cmd->add_option("--output", output)->required();

    // fit
    std::string cube_path, method_text;
    std::uint64_t fit_ica_seed = 0;
    auto* fit = app.add_subcommand("fit", "Fit a transform on the training pixels");
    fit->add_option("--cube", cube_path)->required();
    fit->add_option("--labels", labels_path)->required();
    fit->add_option("--split", split_path)->required();
    fit->add_option("--method", method_text, "pca:K | ica:K | lda:K | cwpca:M[:masked|literal]")->required();
    fit->add_option("--ica-seed", fit_ica_seed);
    fit->add_option("--output", output)->required();

    // transform
    std::string transform_path;
    auto* tr = app.add_subcommand("transform", "Apply a fitted transform to every pixel of a cube");
    tr->add_option("--transform", transform_path)->required();
    tr->add_option("--cube", cube_path)->required();
    tr->add_option("--output", output)->required();

    // train
    std::string config_path, history_path;
    OverrideFlags train_flags;
    auto* train_cmd = app.add_subcommand("train", "Train the reference classifier on a (reduced) cube");
    train_cmd->add_option("--cube", cube_path)->required();
    train_cmd->add_option("--labels", labels_path)->required();
    train_cmd->add_option("--split", split_path)->required();
    train_cmd->add_option("--config", config_path, "pipeline config supplying classifier settings");
    train_flags.add_classifier(train_cmd);
    train_cmd->add_option("--output", output)->required();
    train_cmd->add_option("--history", history_path, "write per-epoch history CSV");

    // evaluate
    std::string model_path, csv_out, method_name;
    double eval_threshold = 0.01;
    auto* eval = app.add_subcommand("evaluate", "Evaluate a trained model on the test pixels");
    eval->add_option("--model", model_path)->required();
    eval->add_option("--cube", cube_path)->required();
    eval->add_option("--labels", labels_path)->required();
    eval->add_option("--split", split_path)->required();
    eval->add_option("--method", method_name, "method label stored in the report");
    eval->add_option("--weak-threshold", eval_threshold);
    eval->add_option("--output", output, "report JSON")->required();
    eval->add_option("--csv", csv_out, "per-class CSV");

    // run
    OverrideFlags run_flags;
    std::string run_cube, run_labels, run_out;
    std::vector<std::string> run_methods;
    auto* run = app.add_subcommand("run", "Full pipeline: split, fit, transform, train, evaluate, report");
    run->add_option("--config", config_path);
    run->add_option("--cube", run_cube);
    run->add_option("--labels", run_labels);
    run->add_option("--output-dir", run_out);
    run->add_option("--methods", run_methods, "method list, overrides the config")->delimiter(',');
    run_flags.add_pipeline(run);
    run_flags.add_classifier(run);

    // report
    std::vector<std::string> report_paths;
    double report_threshold = 0.01;
    auto* report = app.add_subcommand("report", "Weak-class accuracy table across reports");
    report->add_option("--reports", report_paths, "report JSON files")->required();
    report->add_option("--labels", labels_path)->required();
    report->add_option("--threshold", report_threshold);
    report->add_option("--output", output, "CSV output (stdout when omitted)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*convert) {
            auto [cube, raster] = read_csv_scene(csv_input, csv_labels);
            if (!csv_names.empty()) {
                std::ifstream in(csv_names);
                if (!in) throw Error(ErrorCode::IoError, "cannot open " + csv_names);
                for (std::string line; std::getline(in, line);) {
                    if (!line.empty() && line.back() == '\r') line.pop_back();
                    if (!line.empty()) raster.class_names.push_back(line);
                }
            }
            fs::create_directories(out_dir);
            save_cube(cube, fs::path(out_dir) / "cube.hsdr");
            save_labels(raster, fs::path(out_dir) / "labels.hsdr");
            std::cout << "wrote " << cube.width << "x" << cube.height << "x" << cube.bands << " cube, "
                      << raster.class_count() << " classes to " << out_dir << "\n";
        } else if (*gen) {
            auto spec = load_scene_spec(scene_config);
            if (scene_seed) spec.seed = *scene_seed;
            const auto [cube, raster] = generate(spec);
            fs::create_directories(out_dir);
            save_cube(cube, fs::path(out_dir) / "cube.hsdr");
            save_labels(raster, fs::path(out_dir) / "labels.hsdr");
        } else if (*split_cmd) {
            const auto raster = load_labels(labels_path);
            const auto s = stratified_split(raster, split_fraction, split_seed);
            ensure_parent(output);
            save_split(s, output);
            std::cout << "train " << s.count(Partition::Train) << ", test " << s.count(Partition::Test) << "\n";
        } else if (*fit) {
            const auto spec = MethodSpec::parse(method_text);
            const auto cube = load_cube(cube_path);
            const auto raster = load_labels(labels_path);
            const auto s = load_split(split_path);
            const auto t = fit_method(spec, cube, raster, s, fit_ica_seed);
            ensure_parent(output);
            save_transform(t, output);
            if (t.method == Method::ICA && !t.converged) {
                std::cerr << "warning: FastICA stopped after " << t.iterations << " iterations without converging\n";
            }
        } else if (*tr) {
            const auto t = load_transform(transform_path);
            const auto cube = load_cube(cube_path);
            ensure_parent(output);
            save_cube(apply(t, cube), output);
        } else if (*train_cmd) {
            const auto cfg = layered_config(config_path, train_flags);
            const auto cube = load_cube(cube_path);
            const auto raster = load_labels(labels_path);
            const auto s = load_split(split_path);
            const auto model = train_on_split(cube, raster, s, cfg.classifier);
            ensure_parent(output);
            save_model(model, output);
            if (!history_path.empty()) write_text(history_path, history_csv(model));
        } else if (*eval) {
            const auto model = load_model(model_path);
            const auto cube = load_cube(cube_path);
            const auto raster = load_labels(labels_path);
            const auto s = load_split(split_path);
            auto r = evaluate_on_split(model, cube, raster, s);
            r.method = method_name;
            r.weak_class_ids = weak_classes(raster, eval_threshold);
            r.metadata["classifier"] = to_json(model.config);
            ensure_parent(output);
            write_text(output, to_json(r).dump(2) + '\n');
            if (!csv_out.empty()) write_text(csv_out, per_class_csv(r));
            std::cout << "OA " << r.overall_accuracy << "  AA " << r.average_accuracy << "\n";
        } else if (*run) {
            auto cfg = layered_config(config_path, run_flags);
            if (!run_cube.empty()) cfg.cube_path = run_cube;
            if (!run_labels.empty()) cfg.labels_path = run_labels;
            if (!run_out.empty()) cfg.output_dir = run_out;
            if (!run_methods.empty()) {
                cfg.methods.clear();
                for (const auto& m : run_methods) cfg.methods.push_back(MethodSpec::parse(m));
            }
            const auto result = run_pipeline(cfg);
            for (const auto& m : result.methods) {
                if (m.ok) {
                    std::cout << m.method << ": OA " << m.report->overall_accuracy << "  AA " << m.report->average_accuracy << "\n";
                } else {
                    std::cerr << m.method << ": failed: " << m.error << "\n";
                }
            }
            return result.exit_code;
        } else if (*report) {
            const auto raster = load_labels(labels_path);
            std::vector<EvalReport> reports;
            for (const auto& p : report_paths) {
                std::ifstream in(p);
                if (!in) throw Error(ErrorCode::IoError, "cannot open " + p);
                reports.push_back(report_from_json(nlohmann::json::parse(in)));
            }
            const auto table = report_weak_classes(reports, raster, report_threshold);
            if (output.empty()) {
                std::cout << table;
            } else {
                ensure_parent(output);
                write_text(output, table);
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
