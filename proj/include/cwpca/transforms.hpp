#pragma once

#include "cwpca/error.hpp"
#include "cwpca/hsio.hpp"
#include "cwpca/linalg.hpp"
#include "cwpca/rng.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace cwpca {

enum class Method { PCA, ICA, LDA, CWPCA };

inline std::string to_string(Method m) {
    switch (m) {
    case Method::PCA: return "pca";
    case Method::ICA: return "ica";
    case Method::LDA: return "lda";
    case Method::CWPCA: return "cwpca";
    }
    return "unknown";
}

inline Method method_from_string(const std::string& s) {
    if (s == "pca") return Method::PCA;
    if (s == "ica") return Method::ICA;
    if (s == "lda") return Method::LDA;
    if (s == "cwpca") return Method::CWPCA;
    throw Error(ErrorCode::ConfigInvalid, "unknown method '" + s + "'");
}

/// How a class-wise block gathers its statistics.
///  - Masked: only the class's training pixels.
///  - Literal: the whole scene with every other pixel set to zero.
enum class CwpcaMode { Masked, Literal };

inline std::string to_string(CwpcaMode m) { return m == CwpcaMode::Masked ? "masked" : "literal"; }

inline CwpcaMode cwpca_mode_from_string(const std::string& s) {
    if (s == "masked") return CwpcaMode::Masked;
    if (s == "literal") return CwpcaMode::Literal;
    throw Error(ErrorCode::ConfigInvalid, "unknown CW-PCA mode '" + s + "'");
}

/// Fitted affine feature map  y = projection * (x - mean) - offset.
///
/// `offset` is zero for PCA, ICA and LDA. CW-PCA keeps `mean` at zero and
/// folds each class block's own mean into `offset` (block c holds P_c m_c),
/// so every method applies as one matrix-vector product.
struct LinearTransform {
    Method method = Method::PCA;
    Vector mean;       // L
    Matrix projection; // K x L
    Vector offset;     // K

    /// PCA: retained eigenvalues. CW-PCA: per-block eigenvalues in row order.
    /// LDA: generalized (Fisher) eigenvalues. ICA: empty.
    Vector explained_variance;
    double total_variance = 0.0;

    // CW-PCA
    int components_per_class = 0;
    std::vector<int> class_order;
    CwpcaMode mode = CwpcaMode::Masked;

    // ICA
    std::uint64_t seed = 0;
    int iterations = 0;
    bool converged = true;

    Eigen::Index input_bands() const { return projection.cols(); }
    Eigen::Index output_bands() const { return projection.rows(); }
};

inline Matrix apply_samples(const LinearTransform& t, const Matrix& samples) {
    if (samples.cols() != t.input_bands()) {
        throw Error(ErrorCode::DimensionMismatch, "samples have " + std::to_string(samples.cols()) +
                                                      " bands, transform expects " + std::to_string(t.input_bands()));
    }
    Matrix out = (samples.rowwise() - t.mean.transpose()) * t.projection.transpose();
    out.rowwise() -= t.offset.transpose();
    return out;
}

/// Maps every pixel of the cube, labeled or not.
inline HyperCube apply(const LinearTransform& t, const HyperCube& cube) {
    if (cube.bands != static_cast<std::uint32_t>(t.input_bands())) {
        throw Error(ErrorCode::DimensionMismatch, "cube has " + std::to_string(cube.bands) +
                                                      " bands, transform expects " + std::to_string(t.input_bands()));
    }
    return pixels_to_cube(apply_samples(t, cube_pixels(cube)), cube.width, cube.height);
}

/// Inverse of apply_samples for transforms with orthonormal rows (PCA).
inline Matrix reconstruct_samples(const LinearTransform& t, const Matrix& features) {
    Matrix shifted = features.rowwise() + t.offset.transpose();
    Matrix out = shifted * t.projection;
    out.rowwise() += t.mean.transpose();
    return out;
}

// ---------------------------------------------------------------------------
// PCA

inline LinearTransform fit_pca(const Matrix& samples, Eigen::Index k) {
    if (k < 1 || k > samples.cols()) {
        throw Error(ErrorCode::InvalidK, "k = " + std::to_string(k) + " outside [1, " + std::to_string(samples.cols()) + "]");
    }
    if (samples.rows() < 2) throw Error(ErrorCode::EmptyInput, "PCA needs at least 2 samples");

    const auto stats = covariance(samples);
    const auto eig = eigh_symmetric(stats.covariance);

    LinearTransform t;
    t.method = Method::PCA;
    t.mean = stats.mean;
    t.projection = eig.eigenvectors.leftCols(k).transpose();
    t.offset = Vector::Zero(k);
    t.explained_variance = eig.eigenvalues.head(k);
    t.total_variance = stats.covariance.trace();
    return t;
}

// ---------------------------------------------------------------------------
// Class-wise PCA

namespace detail {

inline std::vector<Matrix> rows_by_class(const Samples& s, int n_classes) {
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(n_classes) + 1, 0);
    for (int l : s.labels) ++counts[static_cast<std::size_t>(l)];
    std::vector<Matrix> out(static_cast<std::size_t>(n_classes) + 1);
    for (int c = 0; c <= n_classes; ++c) out[static_cast<std::size_t>(c)].resize(counts[static_cast<std::size_t>(c)], s.features.cols());
    std::vector<Eigen::Index> fill(counts.size(), 0);
    for (Eigen::Index r = 0; r < s.size(); ++r) {
        const auto c = static_cast<std::size_t>(s.labels[static_cast<std::size_t>(r)]);
        out[c].row(fill[c]++) = s.features.row(r);
    }
    return out;
}

/// Mean and covariance over `total` pixels where only `rows` are nonzero.
inline CovarianceStats zero_padded_covariance(const Matrix& rows, Eigen::Index total) {
    require_finite(rows, "samples");
    const double inv = 1.0 / static_cast<double>(total);
    CovarianceStats stats;
    stats.count = total;
    stats.mean = rows.colwise().sum().transpose() * inv;
    const Matrix centered = rows.rowwise() - stats.mean.transpose();
    Matrix scatter = centered.transpose() * centered;
    scatter += static_cast<double>(total - rows.rows()) * stats.mean * stats.mean.transpose();
    stats.covariance = 0.5 * (scatter + scatter.transpose()) * inv;
    return stats;
}

} // namespace detail

/// Fits one PCA per class on that class's training pixels, keeps the first
/// `m` components of each and stacks the blocks in ascending class order,
/// giving m * N output features.
inline LinearTransform fit_cwpca(const HyperCube& cube, const LabelRaster& raster, const SplitAssignment& split, int m,
                                 CwpcaMode mode = CwpcaMode::Masked) {
    require_aligned(cube, raster);
    const int n_classes = raster.class_count();
    const auto bands = static_cast<Eigen::Index>(cube.bands);
    if (n_classes < 1) throw Error(ErrorCode::EmptyClass, "raster has no labeled pixels");
    if (m < 1 || static_cast<Eigen::Index>(m) * n_classes > bands) {
        throw Error(ErrorCode::InvalidM, "m = " + std::to_string(m) + " with " + std::to_string(n_classes) +
                                             " classes exceeds " + std::to_string(bands) + " bands");
    }

    const auto train = cube_to_samples(cube, raster, SampleSubset::Train, &split);
    const auto per_class = detail::rows_by_class(train, n_classes);

    const Eigen::Index k = static_cast<Eigen::Index>(m) * n_classes;
    LinearTransform t;
    t.method = Method::CWPCA;
    t.mean = Vector::Zero(bands);
    t.projection.resize(k, bands);
    t.offset.resize(k);
    t.explained_variance.resize(k);
    t.components_per_class = m;
    t.mode = mode;

    for (int c = 1; c <= n_classes; ++c) {
        const Matrix& rows = per_class[static_cast<std::size_t>(c)];
        if (rows.rows() < 2) {
            throw Error(ErrorCode::InsufficientClassSamples,
                        "class " + std::to_string(c) + " has " + std::to_string(rows.rows()) + " training pixels");
        }
        const Eigen::Index first = static_cast<Eigen::Index>(c - 1) * m;
        if (mode == CwpcaMode::Masked) {
            const auto block = fit_pca(rows, m);
            t.projection.middleRows(first, m) = block.projection;
            t.offset.segment(first, m) = block.projection * block.mean;
            t.explained_variance.segment(first, m) = block.explained_variance;
            t.total_variance += block.total_variance;
        } else {
            const auto stats = detail::zero_padded_covariance(rows, static_cast<Eigen::Index>(cube.pixel_count()));
            const auto eig = eigh_symmetric(stats.covariance);
            const Matrix block = eig.eigenvectors.leftCols(m).transpose();
            t.projection.middleRows(first, m) = block;
            t.offset.segment(first, m) = block * stats.mean;
            t.explained_variance.segment(first, m) = eig.eigenvalues.head(m);
            t.total_variance += stats.covariance.trace();
        }
        t.class_order.push_back(c);
    }
    return t;
}

// ---------------------------------------------------------------------------
// Fisher LDA

/// Directions maximizing between-class over within-class scatter.
///
/// S_w is regularized with eps*I, eps = 1e-6 * trace(S_w) / L, and the
/// problem is solved in the symmetric whitened form
///   S_w^{-1/2} S_b S_w^{-1/2} q = lambda q,   w = S_w^{-1/2} q,
/// each w scaled to unit length.
inline LinearTransform fit_lda(const Matrix& samples, const std::vector<int>& labels, Eigen::Index k) {
    if (static_cast<std::size_t>(samples.rows()) != labels.size()) {
        throw Error(ErrorCode::LengthMismatch, "samples and labels differ in length");
    }
    if (samples.rows() == 0) throw Error(ErrorCode::EmptyInput, "LDA on empty samples");
    require_finite(samples, "samples");
    const Eigen::Index bands = samples.cols();
    int n_classes = 0;
    for (int l : labels) {
        if (l < 1) throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(l));
        n_classes = std::max(n_classes, l);
    }
    if (k < 1 || k > std::min<Eigen::Index>(n_classes, bands)) {
        throw Error(ErrorCode::InvalidK, "LDA k = " + std::to_string(k) + " with " + std::to_string(n_classes) + " classes");
    }

    std::vector<Eigen::Index> counts(static_cast<std::size_t>(n_classes) + 1, 0);
    Matrix class_sums = Matrix::Zero(bands, n_classes + 1);
    for (Eigen::Index r = 0; r < samples.rows(); ++r) {
        const int c = labels[static_cast<std::size_t>(r)];
        ++counts[static_cast<std::size_t>(c)];
        class_sums.col(c) += samples.row(r).transpose();
    }
    for (int c = 1; c <= n_classes; ++c) {
        if (counts[static_cast<std::size_t>(c)] < 2) {
            throw Error(ErrorCode::InsufficientClassSamples,
                        "class " + std::to_string(c) + " has " + std::to_string(counts[static_cast<std::size_t>(c)]) + " samples");
        }
    }

    const double inv_m = 1.0 / static_cast<double>(samples.rows());
    const Vector global_mean = samples.colwise().sum().transpose() * inv_m;
    Matrix class_means(bands, n_classes + 1);
    for (int c = 1; c <= n_classes; ++c) class_means.col(c) = class_sums.col(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);

    Matrix centered(samples.rows(), bands);
    for (Eigen::Index r = 0; r < samples.rows(); ++r) {
        centered.row(r) = samples.row(r) - class_means.col(labels[static_cast<std::size_t>(r)]).transpose();
    }
    Matrix within = centered.transpose() * centered * inv_m;
    within = 0.5 * (within + within.transpose());

    Matrix between = Matrix::Zero(bands, bands);
    for (int c = 1; c <= n_classes; ++c) {
        const Vector d = class_means.col(c) - global_mean;
        between += (static_cast<double>(counts[static_cast<std::size_t>(c)]) * inv_m) * d * d.transpose();
    }

    const double trace_w = within.trace();
    if (!(trace_w > 0.0)) throw Error(ErrorCode::SingularScatter, "within-class scatter has zero trace");
    within.diagonal().array() += 1e-6 * trace_w / static_cast<double>(bands);

    const auto eig_w = eigh_symmetric(within);
    const Matrix w_inv_sqrt = spectral_map(eig_w, [](double l) { return 1.0 / std::sqrt(l); });
    Matrix whitened = w_inv_sqrt * between * w_inv_sqrt;
    whitened = 0.5 * (whitened + whitened.transpose());
    const auto eig_b = eigh_symmetric(whitened);

    LinearTransform t;
    t.method = Method::LDA;
    t.mean = global_mean;
    t.projection.resize(k, bands);
    for (Eigen::Index i = 0; i < k; ++i) {
        Vector dir = w_inv_sqrt * eig_b.eigenvectors.col(i);
        dir.normalize();
        detail::canonical_sign(dir);
        t.projection.row(i) = dir.transpose();
    }
    t.offset = Vector::Zero(k);
    t.explained_variance = eig_b.eigenvalues.head(k);
    t.total_variance = eig_b.eigenvalues.sum();
    return t;
}

// ---------------------------------------------------------------------------
// FastICA

struct IcaOptions {
    int max_iterations = 500;
    double tolerance = 1e-6;
};

namespace detail {

/// W <- (W W^T)^{-1/2} W
inline Matrix symmetric_decorrelate(const Matrix& w) {
    Matrix gram = w * w.transpose();
    gram = 0.5 * (gram + gram.transpose());
    const auto eig = eigh_symmetric(gram);
    return spectral_map(eig, [](double l) { return 1.0 / std::sqrt(l); }) * w;
}

} // namespace detail

/// Symmetric FastICA with g(u) = tanh(u) on data whitened to k dimensions.
/// The returned projection is unmixing * whitening. Non-convergence is not an
/// error: the last iterate is returned with `converged = false`.
inline LinearTransform fit_ica(const Matrix& samples, Eigen::Index k, std::uint64_t seed,
                               const IcaOptions& options = {}) {
    if (k < 1 || k > samples.cols()) {
        throw Error(ErrorCode::InvalidK, "k = " + std::to_string(k) + " outside [1, " + std::to_string(samples.cols()) + "]");
    }
    if (samples.rows() <= k) {
        throw Error(ErrorCode::InvalidK, "ICA needs more samples than components");
    }
    const auto stats = covariance(samples);
    const auto eig = eigh_symmetric(stats.covariance);
    const double floor = 1e-12 * std::max(eig.eigenvalues[0], 1e-300);
    if (!(eig.eigenvalues[k - 1] > floor)) {
        throw Error(ErrorCode::RankDeficient, "covariance has fewer than k positive eigenvalues");
    }
    const Vector scale = eig.eigenvalues.head(k).cwiseSqrt().cwiseInverse();
    const Matrix whitening = scale.asDiagonal() * eig.eigenvectors.leftCols(k).transpose();
    const Matrix z = (samples.rowwise() - stats.mean.transpose()) * whitening.transpose();
    const double inv_m = 1.0 / static_cast<double>(samples.rows());

    Rng rng(seed);
    Matrix w(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j) w(i, j) = rng.normal();
    w = detail::symmetric_decorrelate(w);

    bool converged = false;
    int it = 0;
    while (it < options.max_iterations) {
        ++it;
        const Matrix g = (z * w.transpose()).array().tanh().matrix();
        const Vector g_prime_mean = (1.0 - g.array().square()).colwise().sum().transpose() * inv_m;
        Matrix w_new = (g.transpose() * z) * inv_m - g_prime_mean.asDiagonal() * w;
        w_new = detail::symmetric_decorrelate(w_new);
        const double change = ((w_new * w.transpose()).diagonal().cwiseAbs().array() - 1.0).abs().maxCoeff();
        w = w_new;
        if (change < options.tolerance) {
            converged = true;
            break;
        }
    }

    LinearTransform t;
    t.method = Method::ICA;
    t.mean = stats.mean;
    t.projection = w * whitening;
    for (Eigen::Index i = 0; i < k; ++i) {
        Vector row = t.projection.row(i).transpose();
        detail::canonical_sign(row);
        t.projection.row(i) = row.transpose();
    }
    t.offset = Vector::Zero(k);
    t.total_variance = stats.covariance.trace();
    t.seed = seed;
    t.iterations = it;
    t.converged = converged;
    return t;
}

// ---------------------------------------------------------------------------
// Persistence
//
// Layout: the text line "HSDT 1", then one line of JSON describing the
// transform, then little-endian float64 arrays in this order:
//   mean[L], projection[K*L] (row-major), offset[K], explained_variance[E].

namespace detail {

inline void write_f64(std::ostream& out, double v) { hsdr::write_le<double>(out, v); }

inline double read_f64(std::istream& in) {
    const double v = hsdr::read_le<double>(in);
    if (!in) throw Error(ErrorCode::FormatError, "truncated transform payload");
    return v;
}

} // namespace detail

inline void save_transform(const LinearTransform& t, const std::filesystem::path& path) {
    nlohmann::ordered_json h;
    h["method"] = to_string(t.method);
    h["input_bands"] = t.input_bands();
    h["output_bands"] = t.output_bands();
    h["explained_variance_count"] = t.explained_variance.size();
    h["total_variance"] = t.total_variance;
    if (t.method == Method::CWPCA) {
        h["components_per_class"] = t.components_per_class;
        h["class_order"] = t.class_order;
        h["mode"] = to_string(t.mode);
    }
    if (t.method == Method::ICA) {
        h["seed"] = t.seed;
        h["iterations"] = t.iterations;
        h["converged"] = t.converged;
    }

    auto out = hsdr::open_for_write(path);
    out << "HSDT 1\n" << h.dump() << '\n';
    for (Eigen::Index i = 0; i < t.mean.size(); ++i) detail::write_f64(out, t.mean[i]);
    for (Eigen::Index r = 0; r < t.projection.rows(); ++r)
        for (Eigen::Index c = 0; c < t.projection.cols(); ++c) detail::write_f64(out, t.projection(r, c));
    for (Eigen::Index i = 0; i < t.offset.size(); ++i) detail::write_f64(out, t.offset[i]);
    for (Eigen::Index i = 0; i < t.explained_variance.size(); ++i) detail::write_f64(out, t.explained_variance[i]);
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

inline LinearTransform load_transform(const std::filesystem::path& path) {
    auto in = hsdr::open_for_read(path);
    std::string magic;
    std::getline(in, magic);
    if (magic != "HSDT 1") throw Error(ErrorCode::FormatError, path.string() + ": not a transform file");
    std::string header;
    std::getline(in, header);
    LinearTransform t;
    Eigen::Index bands = 0, k = 0, n_var = 0;
    try {
        const auto h = nlohmann::json::parse(header);
        t.method = method_from_string(h.at("method").get<std::string>());
        bands = h.at("input_bands").get<Eigen::Index>();
        k = h.at("output_bands").get<Eigen::Index>();
        n_var = h.at("explained_variance_count").get<Eigen::Index>();
        t.total_variance = h.at("total_variance").get<double>();
        if (t.method == Method::CWPCA) {
            t.components_per_class = h.at("components_per_class").get<int>();
            t.class_order = h.at("class_order").get<std::vector<int>>();
            t.mode = cwpca_mode_from_string(h.at("mode").get<std::string>());
        }
        if (t.method == Method::ICA) {
            t.seed = h.at("seed").get<std::uint64_t>();
            t.iterations = h.at("iterations").get<int>();
            t.converged = h.at("converged").get<bool>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::FormatError, path.string() + ": " + e.what());
    }
    if (bands < 1 || k < 1 || n_var < 0) throw Error(ErrorCode::FormatError, path.string() + ": bad dimensions");

    t.mean.resize(bands);
    t.projection.resize(k, bands);
    t.offset.resize(k);
    t.explained_variance.resize(n_var);
    for (Eigen::Index i = 0; i < bands; ++i) t.mean[i] = detail::read_f64(in);
    for (Eigen::Index r = 0; r < k; ++r)
        for (Eigen::Index c = 0; c < bands; ++c) t.projection(r, c) = detail::read_f64(in);
    for (Eigen::Index i = 0; i < k; ++i) t.offset[i] = detail::read_f64(in);
    for (Eigen::Index i = 0; i < n_var; ++i) t.explained_variance[i] = detail::read_f64(in);
    hsdr::expect_eof(in, path.string());
    return t;
}

} // namespace cwpca
