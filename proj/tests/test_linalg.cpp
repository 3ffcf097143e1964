#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace cwpca;
using cwpca::testing::eig2_oracle;
using cwpca::testing::eig3_oracle;
using cwpca::testing::random_psd;
using cwpca::testing::random_symmetric;

namespace {

void expect_decomposition_invariants(const Matrix& c, const EigenDecomposition& e) {
    const Eigen::Index n = c.rows();
    const Matrix& u = e.eigenvectors;
    EXPECT_LE((u.transpose() * u - Matrix::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-8);
    const Matrix rebuilt = u * e.eigenvalues.asDiagonal() * u.transpose();
    EXPECT_LE((rebuilt - c).cwiseAbs().maxCoeff(), 1e-7 * std::max(1.0, c.cwiseAbs().maxCoeff()));
    for (Eigen::Index i = 1; i < n; ++i) EXPECT_GE(e.eigenvalues[i - 1], e.eigenvalues[i]);
}

} // namespace

TEST(Covariance, TwoPointsOnDiagonal) {
    Matrix x{{0, 0}, {2, 2}};
    const auto s = covariance(x);
    EXPECT_EQ(s.count, 2);
    EXPECT_DOUBLE_EQ(s.mean[0], 1.0);
    EXPECT_DOUBLE_EQ(s.mean[1], 1.0);
    const Matrix expected{{1, 1}, {1, 1}};
    EXPECT_TRUE(s.covariance.isApprox(expected, 1e-15));
}

TEST(Covariance, SingleSampleHasZeroCovariance) {
    Matrix x{{5, 3}};
    const auto s = covariance(x);
    EXPECT_DOUBLE_EQ(s.mean[0], 5.0);
    EXPECT_DOUBLE_EQ(s.mean[1], 3.0);
    EXPECT_EQ(s.covariance.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Covariance, FourPointCross) {
    Matrix x{{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    const auto s = covariance(x);
    EXPECT_EQ(s.mean.cwiseAbs().maxCoeff(), 0.0);
    const Matrix expected{{0.5, 0}, {0, 0.5}};
    EXPECT_TRUE(s.covariance.isApprox(expected, 1e-15));
}

TEST(Covariance, DividesByCountNotCountMinusOne) {
    Matrix x{{1.0}, {3.0}};
    EXPECT_DOUBLE_EQ(covariance(x).covariance(0, 0), 1.0);
}

TEST(Covariance, Errors) {
    try {
        covariance(Matrix(0, 3));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyInput);
    }
    Matrix bad{{1.0, std::numeric_limits<double>::quiet_NaN()}};
    try {
        covariance(bad);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonFinite);
    }
}

TEST(Covariance, SymmetricAndPositiveSemidefinite) {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const auto x = cwpca::testing::correlated_samples(rng, 50 + trial, 1 + trial % 9);
        const auto s = covariance(x);
        const Matrix& c = s.covariance;
        for (Eigen::Index i = 0; i < c.rows(); ++i)
            for (Eigen::Index j = 0; j < c.cols(); ++j)
                EXPECT_LE(std::abs(c(i, j) - c(j, i)), 1e-12 * std::max(1.0, std::abs(c(i, j))));
        const auto e = eigh_symmetric(c);
        EXPECT_GE(e.eigenvalues.minCoeff(), -1e-9 * c.trace());
    }
}

TEST(Eigh, DiagonalInput) {
    Matrix c{{3, 0}, {0, 1}};
    const auto e = eigh_symmetric(c);
    EXPECT_DOUBLE_EQ(e.eigenvalues[0], 3.0);
    EXPECT_DOUBLE_EQ(e.eigenvalues[1], 1.0);
    EXPECT_TRUE(e.eigenvectors.isApprox(Matrix::Identity(2, 2)));
}

TEST(Eigh, DiagonalInputUnsorted) {
    Matrix c{{1, 0}, {0, 3}};
    const auto e = eigh_symmetric(c);
    EXPECT_DOUBLE_EQ(e.eigenvalues[0], 3.0);
    EXPECT_DOUBLE_EQ(e.eigenvectors(1, 0), 1.0);
    EXPECT_DOUBLE_EQ(e.eigenvectors(0, 1), 1.0);
}

TEST(Eigh, TwoByTwoCoupled) {
    Matrix c{{2, 1}, {1, 2}};
    const auto e = eigh_symmetric(c);
    EXPECT_NEAR(e.eigenvalues[0], 3.0, 1e-14);
    EXPECT_NEAR(e.eigenvalues[1], 1.0, 1e-14);
    const double h = 1.0 / std::sqrt(2.0);
    // Largest-magnitude entry positive, first index on ties.
    EXPECT_NEAR(e.eigenvectors(0, 0), h, 1e-14);
    EXPECT_NEAR(e.eigenvectors(1, 0), h, 1e-14);
    EXPECT_NEAR(e.eigenvectors(0, 1), h, 1e-14);
    EXPECT_NEAR(e.eigenvectors(1, 1), -h, 1e-14);
}

TEST(Eigh, DegenerateIdentityOnlyInvariants) {
    const Matrix c = Matrix::Identity(4, 4);
    const auto e = eigh_symmetric(c);
    for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(e.eigenvalues[i], 1.0);
    expect_decomposition_invariants(c, e);
}

TEST(Eigh, ZeroMatrix) {
    const auto e = eigh_symmetric(Matrix::Zero(3, 3));
    EXPECT_EQ(e.eigenvalues.cwiseAbs().maxCoeff(), 0.0);
    expect_decomposition_invariants(Matrix::Zero(3, 3), e);
}

TEST(Eigh, OneByOne) {
    Matrix c{{-2.5}};
    const auto e = eigh_symmetric(c);
    EXPECT_EQ(e.eigenvalues[0], -2.5);
    EXPECT_EQ(e.eigenvectors(0, 0), 1.0);
}

TEST(Eigh, RejectsAsymmetricInput) {
    Matrix c{{1, 2}, {2.1, 1}};
    try {
        eigh_symmetric(c);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NotSymmetric);
    }
    // Within the 1e-9 absolute tolerance is accepted.
    Matrix near{{1, 2}, {2 + 5e-10, 1}};
    EXPECT_NO_THROW(eigh_symmetric(near));
}

TEST(Eigh, IterationCapReportsNoConvergence) {
    Rng rng(3);
    const Matrix c = random_symmetric(rng, 12);
    JacobiOptions opts;
    opts.max_sweeps = 1;
    try {
        eigh_symmetric(c, opts);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoConvergence);
    }
}

TEST(Eigh, SignConventionLargestEntryPositive) {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const auto e = eigh_symmetric(random_symmetric(rng, 6));
        for (Eigen::Index k = 0; k < 6; ++k) {
            Eigen::Index arg = 0;
            e.eigenvectors.col(k).cwiseAbs().maxCoeff(&arg);
            EXPECT_GT(e.eigenvectors(arg, k), 0.0);
        }
    }
}

TEST(Eigh, Deterministic) {
    Rng rng(17);
    const Matrix c = random_psd(rng, 20);
    const auto a = eigh_symmetric(c);
    const auto b = eigh_symmetric(c);
    EXPECT_TRUE((a.eigenvalues.array() == b.eigenvalues.array()).all());
    EXPECT_TRUE((a.eigenvectors.array() == b.eigenvectors.array()).all());
}

TEST(EighProperty, CharacteristicPolynomialOracle) {
    Rng rng(2024);
    for (int trial = 0; trial < 300; ++trial) {
        const Matrix c2 = random_symmetric(rng, 2);
        const auto e2 = eigh_symmetric(c2);
        const auto o2 = eig2_oracle(c2);
        for (int i = 0; i < 2; ++i) EXPECT_NEAR(e2.eigenvalues[i], o2[i], 1e-8 * std::max(1.0, std::abs(o2[i])));

        const Matrix c3 = random_symmetric(rng, 3);
        const auto e3 = eigh_symmetric(c3);
        const auto o3 = eig3_oracle(c3);
        for (int i = 0; i < 3; ++i) EXPECT_NEAR(e3.eigenvalues[i], o3[i], 1e-8 * std::max(1.0, std::abs(o3[i])));
    }
}

TEST(EighProperty, TraceConservationUpTo64) {
    Rng rng(99);
    for (Eigen::Index n : {1, 2, 5, 16, 33, 64}) {
        const Matrix c = random_psd(rng, n);
        const auto e = eigh_symmetric(c);
        EXPECT_NEAR(e.eigenvalues.sum(), c.trace(), 1e-6 * c.trace());
        expect_decomposition_invariants(c, e);
    }
}

TEST(EighProperty, SortedForThousandPsdInputs) {
    Rng rng(7);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto e = eigh_symmetric(random_psd(rng, 2 + trial % 7));
        for (Eigen::Index i = 1; i < e.eigenvalues.size(); ++i) ASSERT_GE(e.eigenvalues[i - 1], e.eigenvalues[i]);
    }
}

TEST(EighProperty, RepeatedEigenvaluesStillOrthonormal) {
    Rng rng(8);
    // Q diag(5,5,5,1,1) Q^T with a random orthogonal Q.
    const Matrix q = Eigen::HouseholderQR<Matrix>(cwpca::testing::random_matrix(rng, 5, 5)).householderQ();
    Vector d(5);
    d << 5, 5, 5, 1, 1;
    Matrix c = q * d.asDiagonal() * q.transpose();
    c = 0.5 * (c + c.transpose());
    const auto e = eigh_symmetric(c);
    for (int i = 0; i < 5; ++i) EXPECT_NEAR(e.eigenvalues[i], d[i], 1e-10);
    expect_decomposition_invariants(c, e);
}

TEST(SpectralMap, InverseSquareRoot) {
    Rng rng(4);
    Matrix c = random_psd(rng, 6) + Matrix::Identity(6, 6);
    const Matrix r = spectral_map(eigh_symmetric(c), [](double l) { return 1.0 / std::sqrt(l); });
    EXPECT_LE((r * c * r - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-10);
}
