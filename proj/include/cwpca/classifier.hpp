#pragma once

#include "cwpca/error.hpp"
#include "cwpca/hsio.hpp"
#include "cwpca/linalg.hpp"
#include "cwpca/rng.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace cwpca {

enum class Activation { Relu, Tanh };

inline std::string to_string(Activation a) { return a == Activation::Relu ? "relu" : "tanh"; }

inline Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "tanh") return Activation::Tanh;
    throw Error(ErrorCode::ConfigInvalid, "unknown activation '" + s + "'");
}

struct MlpConfig {
    std::vector<int> layer_sizes; // input K, hidden..., output N
    Activation activation = Activation::Relu;
    double learning_rate = 0.01;
    int epochs = 90;
    int batch_size = 64;
    std::uint64_t seed = 0;
    double validation_fraction = 0.1;

    /// [K, 64, 32, N], relu, lr 0.01, batch 64, 90 epochs, 10% validation.
    static MlpConfig reference(int features, int classes, std::uint64_t seed = 0) {
        MlpConfig cfg;
        cfg.layer_sizes = {features, 64, 32, classes};
        cfg.seed = seed;
        return cfg;
    }

    void validate() const {
        if (layer_sizes.size() < 2) throw Error(ErrorCode::ConfigInvalid, "need at least input and output layers");
        for (int s : layer_sizes)
            if (s < 1) throw Error(ErrorCode::ConfigInvalid, "layer sizes must be positive");
        if (!(learning_rate > 0.0)) throw Error(ErrorCode::ConfigInvalid, "learning_rate must be positive");
        if (epochs < 1) throw Error(ErrorCode::ConfigInvalid, "epochs must be >= 1");
        if (batch_size < 1) throw Error(ErrorCode::ConfigInvalid, "batch_size must be >= 1");
        if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
            throw Error(ErrorCode::ConfigInvalid, "validation_fraction must lie in [0, 1)");
        }
    }

    int input_size() const { return layer_sizes.front(); }
    int class_count() const { return layer_sizes.back(); }
};

inline nlohmann::ordered_json to_json(const MlpConfig& c) {
    nlohmann::ordered_json j;
    j["layer_sizes"] = c.layer_sizes;
    j["activation"] = to_string(c.activation);
    j["learning_rate"] = c.learning_rate;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["seed"] = c.seed;
    j["validation_fraction"] = c.validation_fraction;
    return j;
}

inline MlpConfig mlp_config_from_json(const nlohmann::json& j) {
    MlpConfig c;
    c.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
    c.activation = activation_from_string(j.at("activation").get<std::string>());
    c.learning_rate = j.at("learning_rate").get<double>();
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.validation_fraction = j.at("validation_fraction").get<double>();
    return c;
}

/// weights[l] maps layer l to layer l+1 and is (out x in).
struct MlpWeights {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;

    std::size_t layers() const { return weights.size(); }
};

struct LossAndGradient {
    double loss = 0.0;
    MlpWeights gradient;
};

struct EpochRecord {
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
};

struct TrainedModel {
    MlpConfig config;
    MlpWeights weights;
    Vector feature_mean;
    Vector feature_scale;
    std::vector<EpochRecord> history;
};

namespace detail {

inline Matrix activate(const Matrix& z, Activation a) {
    if (a == Activation::Relu) return z.cwiseMax(0.0);
    return z.array().tanh().matrix();
}

/// Derivative expressed through the pre-activation z and activation h.
inline Matrix activation_slope(const Matrix& z, const Matrix& h, Activation a) {
    if (a == Activation::Relu) return (z.array() > 0.0).cast<double>().matrix();
    return (1.0 - h.array().square()).matrix();
}

/// Row-wise softmax in place; returns per-row log-sum-exp.
inline Vector softmax_rows(Matrix& z) {
    Vector lse(z.rows());
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const double top = z.row(r).maxCoeff();
        z.row(r) = (z.row(r).array() - top).exp().matrix();
        const double sum = z.row(r).sum();
        z.row(r) /= sum;
        lse[r] = top + std::log(sum);
    }
    return lse;
}

struct ForwardPass {
    std::vector<Matrix> pre;  // z per layer
    std::vector<Matrix> post; // h per layer, post[0] = input
    Matrix probabilities;
    Vector log_sum_exp;
};

inline ForwardPass forward(const MlpWeights& net, Activation act, const Matrix& x) {
    ForwardPass f;
    f.post.push_back(x);
    for (std::size_t l = 0; l < net.layers(); ++l) {
        Matrix z = f.post.back() * net.weights[l].transpose();
        z.rowwise() += net.biases[l].transpose();
        if (l + 1 < net.layers()) {
            f.post.push_back(activate(z, act));
            f.pre.push_back(std::move(z));
        } else {
            f.pre.push_back(z);
            f.log_sum_exp = softmax_rows(z);
            f.probabilities = std::move(z);
        }
    }
    return f;
}

inline void check_labels(const std::vector<int>& labels, int n_classes) {
    for (int l : labels) {
        if (l < 1 || l > n_classes) {
            throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(l) + " outside 1.." + std::to_string(n_classes));
        }
    }
}

} // namespace detail

/// Mean softmax cross-entropy of a batch and its gradient by backpropagation.
inline LossAndGradient loss_and_gradient(const MlpWeights& net, Activation act, const Matrix& features,
                                         const std::vector<int>& labels) {
    if (static_cast<std::size_t>(features.rows()) != labels.size() || features.rows() == 0) {
        throw Error(ErrorCode::LengthMismatch, "batch features and labels differ in length");
    }
    if (features.cols() != net.weights.front().cols()) {
        throw Error(ErrorCode::DimensionMismatch, "batch width does not match the input layer");
    }
    require_finite(features, "features");
    const auto n_classes = static_cast<int>(net.weights.back().rows());
    detail::check_labels(labels, n_classes);

    auto f = detail::forward(net, act, features);
    const Eigen::Index batch = features.rows();
    const double inv_b = 1.0 / static_cast<double>(batch);

    LossAndGradient out;
    const Matrix& logits = f.pre.back();
    for (Eigen::Index r = 0; r < batch; ++r) {
        out.loss += f.log_sum_exp[r] - logits(r, labels[static_cast<std::size_t>(r)] - 1);
    }
    out.loss *= inv_b;
    if (!std::isfinite(out.loss)) throw Error(ErrorCode::NonFinite, "loss is not finite");

    Matrix delta = f.probabilities;
    for (Eigen::Index r = 0; r < batch; ++r) delta(r, labels[static_cast<std::size_t>(r)] - 1) -= 1.0;
    delta *= inv_b;

    const std::size_t n_layers = net.layers();
    out.gradient.weights.resize(n_layers);
    out.gradient.biases.resize(n_layers);
    for (std::size_t l = n_layers; l-- > 0;) {
        out.gradient.weights[l] = delta.transpose() * f.post[l];
        out.gradient.biases[l] = delta.colwise().sum().transpose();
        if (l > 0) {
            delta = (delta * net.weights[l]).cwiseProduct(detail::activation_slope(f.pre[l - 1], f.post[l], act));
        }
    }
    return out;
}

/// Glorot-uniform (tanh) or He-uniform (relu) weights, zero biases, drawn
/// row by row from `rng`.
inline MlpWeights init_weights(const std::vector<int>& sizes, Activation act, Rng& rng) {
    MlpWeights net;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const int in = sizes[l];
        const int out = sizes[l + 1];
        const double limit = act == Activation::Relu ? std::sqrt(6.0 / in) : std::sqrt(6.0 / (in + out));
        Matrix w(out, in);
        for (int r = 0; r < out; ++r)
            for (int c = 0; c < in; ++c) w(r, c) = rng.uniform(-limit, limit);
        net.weights.push_back(std::move(w));
        net.biases.push_back(Vector::Zero(out));
    }
    return net;
}

namespace detail {

struct LossAccuracy {
    double loss = 0.0;
    double accuracy = 0.0;
};

inline LossAccuracy score(const MlpWeights& net, Activation act, const Matrix& x, const std::vector<int>& labels) {
    const auto f = forward(net, act, x);
    LossAccuracy s;
    Eigen::Index correct = 0;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const int y = labels[static_cast<std::size_t>(r)] - 1;
        s.loss += f.log_sum_exp[r] - f.pre.back()(r, y);
        Eigen::Index arg = 0;
        f.probabilities.row(r).maxCoeff(&arg);
        if (arg == y) ++correct;
    }
    s.loss /= static_cast<double>(x.rows());
    s.accuracy = static_cast<double>(correct) / static_cast<double>(x.rows());
    return s;
}

inline Matrix take_rows(const Matrix& m, const std::vector<Eigen::Index>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
    return out;
}

inline std::vector<int> take(const std::vector<int>& v, const std::vector<Eigen::Index>& rows) {
    std::vector<int> out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(v[static_cast<std::size_t>(r)]);
    return out;
}

inline constexpr std::uint64_t kValidationStreamSalt = 0xA5A5A5A5A5A5A5A5ULL;

/// Stratified carve of validation rows: per class, shuffle the class's row
/// indices with Rng::stream(seed ^ salt, class) and move
/// min(stratified_take(n, fraction), n - 1) of them to validation.
inline std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>>
carve_validation(const std::vector<int>& labels, int n_classes, double fraction, std::uint64_t seed) {
    std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(n_classes) + 1);
    for (std::size_t i = 0; i < labels.size(); ++i) members[static_cast<std::size_t>(labels[i])].push_back(static_cast<Eigen::Index>(i));
    std::vector<bool> is_val(labels.size(), false);
    if (fraction > 0.0) {
        for (int c = 1; c <= n_classes; ++c) {
            auto& idx = members[static_cast<std::size_t>(c)];
            if (idx.size() < 2) continue;
            auto rng = Rng::stream(seed ^ kValidationStreamSalt, static_cast<std::uint64_t>(c));
            rng.shuffle(idx);
            const auto n_val = std::min(stratified_take(idx.size(), fraction), idx.size() - 1);
            for (std::size_t k = 0; k < n_val; ++k) is_val[static_cast<std::size_t>(idx[k])] = true;
        }
    }
    std::vector<Eigen::Index> train, val;
    for (std::size_t i = 0; i < labels.size(); ++i) (is_val[i] ? val : train).push_back(static_cast<Eigen::Index>(i));
    return {train, val};
}

} // namespace detail

/// Mini-batch gradient descent on softmax cross-entropy.
///
/// Features are standardized with the training part's per-dimension mean and
/// population standard deviation (constant dimensions get scale 1). Weight
/// init draws from Rng::stream(seed, 0); epoch e (0-based) shuffles the
/// training rows with Rng::stream(seed, e + 1). When no validation rows are
/// carved, the validation columns of the history are NaN.
inline TrainedModel train(const Matrix& features, const std::vector<int>& labels, const MlpConfig& cfg) {
    cfg.validate();
    if (static_cast<std::size_t>(features.rows()) != labels.size()) {
        throw Error(ErrorCode::LengthMismatch, "features and labels differ in length");
    }
    if (features.cols() != cfg.input_size()) {
        throw Error(ErrorCode::DimensionMismatch, "features have " + std::to_string(features.cols()) +
                                                      " columns, input layer is " + std::to_string(cfg.input_size()));
    }
    require_finite(features, "features");
    detail::check_labels(labels, cfg.class_count());

    const auto [train_rows, val_rows] =
        detail::carve_validation(labels, cfg.class_count(), cfg.validation_fraction, cfg.seed);
    if (train_rows.size() < static_cast<std::size_t>(cfg.batch_size)) {
        throw Error(ErrorCode::ConfigInvalid, "training part has " + std::to_string(train_rows.size()) +
                                                  " rows, fewer than batch_size " + std::to_string(cfg.batch_size));
    }

    TrainedModel model;
    model.config = cfg;
    Matrix x_train = detail::take_rows(features, train_rows);
    const auto y_train = detail::take(labels, train_rows);
    const double inv_n = 1.0 / static_cast<double>(x_train.rows());
    model.feature_mean = x_train.colwise().sum().transpose() * inv_n;
    x_train.rowwise() -= model.feature_mean.transpose();
    model.feature_scale = (x_train.array().square().colwise().sum() * inv_n).sqrt().matrix().transpose();
    for (Eigen::Index i = 0; i < model.feature_scale.size(); ++i) {
        if (!(model.feature_scale[i] > 0.0)) model.feature_scale[i] = 1.0;
    }
    x_train = x_train * model.feature_scale.cwiseInverse().asDiagonal();

    Matrix x_val;
    std::vector<int> y_val;
    if (!val_rows.empty()) {
        x_val = detail::take_rows(features, val_rows);
        x_val.rowwise() -= model.feature_mean.transpose();
        x_val = x_val * model.feature_scale.cwiseInverse().asDiagonal();
        y_val = detail::take(labels, val_rows);
    }

    auto init_rng = Rng::stream(cfg.seed, 0);
    model.weights = init_weights(cfg.layer_sizes, cfg.activation, init_rng);

    std::vector<Eigen::Index> order(static_cast<std::size_t>(x_train.rows()));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        auto rng = Rng::stream(cfg.seed, static_cast<std::uint64_t>(epoch) + 1);
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const std::vector<Eigen::Index> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                  order.begin() + static_cast<std::ptrdiff_t>(stop));
            LossAndGradient lg;
            try {
                lg = loss_and_gradient(model.weights, cfg.activation, detail::take_rows(x_train, batch),
                                       detail::take(y_train, batch));
            } catch (const Error& e) {
                if (e.code() != ErrorCode::NonFinite) throw;
                throw Error(ErrorCode::NonFinite, "training diverged in epoch " + std::to_string(epoch + 1));
            }
            for (std::size_t l = 0; l < model.weights.layers(); ++l) {
                model.weights.weights[l] -= cfg.learning_rate * lg.gradient.weights[l];
                model.weights.biases[l] -= cfg.learning_rate * lg.gradient.biases[l];
            }
        }

        EpochRecord rec;
        const auto tr = detail::score(model.weights, cfg.activation, x_train, y_train);
        rec.train_loss = tr.loss;
        rec.train_acc = tr.accuracy;
        if (!std::isfinite(tr.loss)) {
            throw Error(ErrorCode::NonFinite, "training diverged in epoch " + std::to_string(epoch + 1));
        }
        if (!y_val.empty()) {
            const auto va = detail::score(model.weights, cfg.activation, x_val, y_val);
            rec.val_loss = va.loss;
            rec.val_acc = va.accuracy;
        } else {
            rec.val_loss = std::numeric_limits<double>::quiet_NaN();
            rec.val_acc = std::numeric_limits<double>::quiet_NaN();
        }
        model.history.push_back(rec);
    }
    return model;
}

struct Prediction {
    std::vector<int> labels; // 1..N
    Matrix probabilities;    // M x N
};

inline Prediction predict(const TrainedModel& model, const Matrix& features) {
    if (features.cols() != model.config.input_size()) {
        throw Error(ErrorCode::DimensionMismatch, "features have " + std::to_string(features.cols()) +
                                                      " columns, model expects " + std::to_string(model.config.input_size()));
    }
    Matrix x = features.rowwise() - model.feature_mean.transpose();
    x = x * model.feature_scale.cwiseInverse().asDiagonal();
    auto f = detail::forward(model.weights, model.config.activation, x);
    Prediction p;
    p.labels.resize(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        Eigen::Index arg = 0;
        f.probabilities.row(r).maxCoeff(&arg);
        p.labels[static_cast<std::size_t>(r)] = static_cast<int>(arg) + 1;
    }
    p.probabilities = std::move(f.probabilities);
    return p;
}

// ---------------------------------------------------------------------------
// Persistence: "HSDM 1" line, one JSON line (config + history), then LE
// float64: feature_mean[K], feature_scale[K], then per layer the weight
// matrix row-major followed by the bias vector.

inline void save_model(const TrainedModel& m, const std::filesystem::path& path) {
    nlohmann::ordered_json h;
    h["config"] = to_json(m.config);
    auto& hist = h["history"] = nlohmann::ordered_json::array();
    for (const auto& r : m.history) {
        // NaN has no JSON form; missing validation is stored as null.
        auto num = [](double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(); };
        hist.push_back({num(r.train_loss), num(r.train_acc), num(r.val_loss), num(r.val_acc)});
    }
    auto out = hsdr::open_for_write(path);
    out << "HSDM 1\n" << h.dump() << '\n';
    auto put = [&](double v) { hsdr::write_le<double>(out, v); };
    for (Eigen::Index i = 0; i < m.feature_mean.size(); ++i) put(m.feature_mean[i]);
    for (Eigen::Index i = 0; i < m.feature_scale.size(); ++i) put(m.feature_scale[i]);
    for (std::size_t l = 0; l < m.weights.layers(); ++l) {
        const auto& w = m.weights.weights[l];
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) put(w(r, c));
        for (Eigen::Index i = 0; i < m.weights.biases[l].size(); ++i) put(m.weights.biases[l][i]);
    }
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

inline TrainedModel load_model(const std::filesystem::path& path) {
    auto in = hsdr::open_for_read(path);
    std::string line;
    std::getline(in, line);
    if (line != "HSDM 1") throw Error(ErrorCode::FormatError, path.string() + ": not a model file");
    std::getline(in, line);
    TrainedModel m;
    try {
        const auto h = nlohmann::json::parse(line);
        m.config = mlp_config_from_json(h.at("config"));
        for (const auto& r : h.at("history")) {
            auto num = [](const nlohmann::json& v) {
                return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
            };
            m.history.push_back({num(r.at(0)), num(r.at(1)), num(r.at(2)), num(r.at(3))});
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::FormatError, path.string() + ": " + e.what());
    }
    m.config.validate();
    auto get = [&]() {
        const double v = hsdr::read_le<double>(in);
        if (!in) throw Error(ErrorCode::FormatError, path.string() + ": truncated weights");
        return v;
    };
    const int k = m.config.input_size();
    m.feature_mean.resize(k);
    m.feature_scale.resize(k);
    for (int i = 0; i < k; ++i) m.feature_mean[i] = get();
    for (int i = 0; i < k; ++i) m.feature_scale[i] = get();
    const auto& sizes = m.config.layer_sizes;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        Matrix w(sizes[l + 1], sizes[l]);
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = get();
        Vector b(sizes[l + 1]);
        for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = get();
        m.weights.weights.push_back(std::move(w));
        m.weights.biases.push_back(std::move(b));
    }
    hsdr::expect_eof(in, path.string());
    return m;
}

inline std::string format_number(double v) {
    if (!std::isfinite(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.8f", v);
    return buf;
}

/// epoch,train_loss,train_acc,val_loss,val_acc (epochs numbered from 1).
inline std::string history_csv(const TrainedModel& m) {
    std::string out = "epoch,train_loss,train_acc,val_loss,val_acc\n";
    for (std::size_t e = 0; e < m.history.size(); ++e) {
        const auto& r = m.history[e];
        out += std::to_string(e + 1) + ',' + format_number(r.train_loss) + ',' + format_number(r.train_acc) + ',' +
               format_number(r.val_loss) + ',' + format_number(r.val_acc) + '\n';
    }
    return out;
}

} // namespace cwpca
