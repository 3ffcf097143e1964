#pragma once

#include "cwpca/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace cwpca {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Sample count, mean spectrum and population covariance of a pixel set.
struct CovarianceStats {
    Eigen::Index count = 0;
    Vector mean;
    Matrix covariance;
};

/// Eigenpairs of a symmetric matrix. Column i of `eigenvectors` pairs with
/// `eigenvalues[i]`; eigenvalues are non-increasing.
struct EigenDecomposition {
    Vector eigenvalues;
    Matrix eigenvectors;
};

struct JacobiOptions {
    int max_sweeps = 100;
    /// Convergence when the off-diagonal Frobenius norm drops below
    /// relative_tolerance * ||C||_F.
    double relative_tolerance = 1e-12;
    /// Absolute tolerance on |C(i,j) - C(j,i)| accepted as symmetric input.
    double symmetry_tolerance = 1e-9;
};

inline void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) {
        throw Error(ErrorCode::NonFinite, std::string(what) + " contains NaN or Inf");
    }
}

/// Mean and covariance of the rows of `samples` (M x L), both normalized by M.
inline CovarianceStats covariance(const Matrix& samples) {
    if (samples.rows() == 0 || samples.cols() == 0) {
        throw Error(ErrorCode::EmptyInput, "covariance of an empty sample matrix");
    }
    require_finite(samples, "samples");

    const auto count = samples.rows();
    const double inv = 1.0 / static_cast<double>(count);

    CovarianceStats stats;
    stats.count = count;
    stats.mean = samples.colwise().sum().transpose() * inv;
    const Matrix centered = samples.rowwise() - stats.mean.transpose();
    Matrix scatter = centered.transpose() * centered;
    stats.covariance = 0.5 * (scatter + scatter.transpose()) * inv;
    return stats;
}

namespace detail {

inline void jacobi_rotate(Matrix& a, Matrix& v, Eigen::Index p, Eigen::Index q) {
    const double apq = a(p, q);
    const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
    double t;
    if (std::abs(theta) > 1e150) {
        t = 0.5 / theta;
    } else {
        t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
    }
    const double c = 1.0 / std::sqrt(t * t + 1.0);
    const double s = t * c;

    const Eigen::Index n = a.rows();
    a(p, p) -= t * apq;
    a(q, q) += t * apq;
    a(p, q) = 0.0;
    a(q, p) = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) {
        if (r == p || r == q) continue;
        const double arp = a(r, p);
        const double arq = a(r, q);
        const double new_rp = c * arp - s * arq;
        const double new_rq = s * arp + c * arq;
        a(r, p) = new_rp;
        a(p, r) = new_rp;
        a(r, q) = new_rq;
        a(q, r) = new_rq;
    }
    double* vp = v.col(p).data();
    double* vq = v.col(q).data();
    for (Eigen::Index r = 0; r < n; ++r) {
        const double x = vp[r];
        const double y = vq[r];
        vp[r] = c * x - s * y;
        vq[r] = s * x + c * y;
    }
}

inline double off_diagonal_norm(const Matrix& a) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            if (i != j) sum += a(i, j) * a(i, j);
        }
    }
    return std::sqrt(sum);
}

/// Flip `col` so its largest-magnitude entry is positive (lowest index wins ties).
inline void canonical_sign(Eigen::Ref<Vector> col) {
    Eigen::Index best = 0;
    double best_abs = -1.0;
    for (Eigen::Index i = 0; i < col.size(); ++i) {
        if (std::abs(col[i]) > best_abs) {
            best_abs = std::abs(col[i]);
            best = i;
        }
    }
    if (col[best] < 0.0) col = -col;
}

} // namespace detail

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Output is sorted by descending eigenvalue (stable with respect to the
/// diagonal position at convergence) and each eigenvector is sign-normalized
/// so that its largest-magnitude entry is positive.
inline EigenDecomposition eigh_symmetric(const Matrix& c, const JacobiOptions& options = {}) {
    if (c.rows() == 0 || c.rows() != c.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "eigh_symmetric needs a non-empty square matrix");
    }
    require_finite(c, "matrix");
    const double asym = (c - c.transpose()).cwiseAbs().maxCoeff();
    if (asym > options.symmetry_tolerance) {
        throw Error(ErrorCode::NotSymmetric,
                    "max |C - C^T| = " + std::to_string(asym));
    }

    const Eigen::Index n = c.rows();
    Matrix a = 0.5 * (c + c.transpose());
    Matrix v = Matrix::Identity(n, n);
    const double threshold = options.relative_tolerance * a.norm();

    bool converged = false;
    for (int sweep = 0; sweep <= options.max_sweeps; ++sweep) {
        if (detail::off_diagonal_norm(a) <= threshold) {
            converged = true;
            break;
        }
        if (sweep == options.max_sweeps) break;
        for (Eigen::Index p = 0; p + 1 < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                if (a(p, q) != 0.0) detail::jacobi_rotate(a, v, p, q);
            }
        }
    }
    if (!converged) {
        throw Error(ErrorCode::NoConvergence,
                    "Jacobi did not converge in " + std::to_string(options.max_sweeps) + " sweeps");
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });

    EigenDecomposition out;
    out.eigenvalues.resize(n);
    out.eigenvectors.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto src = order[static_cast<std::size_t>(k)];
        out.eigenvalues[k] = a(src, src);
        out.eigenvectors.col(k) = v.col(src);
        detail::canonical_sign(out.eigenvectors.col(k));
    }
    return out;
}

/// U f(D) U^T for a symmetric matrix; used for inverse square roots.
template <typename F>
Matrix spectral_map(const EigenDecomposition& eig, F&& f) {
    Vector mapped = eig.eigenvalues.unaryExpr(std::forward<F>(f));
    return eig.eigenvectors * mapped.asDiagonal() * eig.eigenvectors.transpose();
}

} // namespace cwpca
