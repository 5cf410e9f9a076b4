#include "crosscov/errors.hpp"
#include "crosscov/joint_model.hpp"
#include "crosscov/samplers.hpp"
#include "helpers.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace crosscov;
using namespace crosscov::joint;
using matops::Matrix;
using spectra::SpectrumSpec;
using testing_support::max_abs;

namespace {

spectra::CovarianceModel cov(const SpectrumSpec& s, std::optional<std::uint64_t> rot = {}) {
    return spectra::build_covariance(s, rot);
}

void expect_invariants(const JointGaussianModel& m) {
    const Matrix& sy = m.sigma_y.matrix().matrix();
    const double ny = m.sigma_y.op_norm();
    EXPECT_LE(max_abs(m.P.matrix() + m.Q.matrix() - sy), 1e-10 * ny);
    const double np = matops::operator_norm(m.P.matrix(), matops::NormMethod::exact);
    const double nq = matops::operator_norm(m.Q.matrix(), matops::NormMethod::exact);
    EXPECT_GE(np + nq, ny - 1e-8);
    EXPECT_NEAR(m.P.trace() + m.Q.trace(), m.sigma_y.trace(), 1e-8 * m.sigma_y.trace());
    // Joint block PSD.
    const Eigen::Index dx = m.sigma_x.dim(), dy = m.sigma_y.dim();
    Matrix joint(dx + dy, dx + dy);
    joint << m.sigma_x.matrix().matrix(), m.sigma_xy, m.sigma_xy.transpose(), sy;
    const Eigen::SelfAdjointEigenSolver<Matrix> es(joint);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10 * es.eigenvalues().maxCoeff());
}

}  // namespace

TEST(Assemble, IsotropicAligned) {
    const double rho = 0.6;
    const auto id = cov(SpectrumSpec::flat(4));
    const auto m = assemble(id, id, CouplingSpec::aligned(rho));
    const Matrix I = Matrix::Identity(4, 4);
    EXPECT_LE(max_abs(m.sigma_xy - rho * I), 1e-14);
    EXPECT_LE(max_abs(m.L - rho * I), 1e-14);
    EXPECT_LE(max_abs(m.sigma_z.matrix() - (1 - rho * rho) * I), 1e-14);
    expect_invariants(m);
}

TEST(Assemble, IndependentMarginals) {
    const auto x = cov(SpectrumSpec::poly(5, 1.0), 2);
    const auto y = cov(SpectrumSpec::spiked(3, 1, 4.0));
    const auto m = assemble(x, y, CouplingSpec::independent());
    EXPECT_EQ(max_abs(m.P.matrix()), 0.0);
    EXPECT_LE(max_abs(m.Q.matrix() - y.matrix().matrix()), 0.0);
    EXPECT_FALSE(m.r_p.has_value());
    ASSERT_TRUE(m.r_q.has_value());
    EXPECT_DOUBLE_EQ(*m.r_q, m.r_y);
    expect_invariants(m);
}

TEST(Assemble, SingularMarginalUsesPseudoInverse) {
    const double rho = 0.7;
    const auto x = spectra::CovarianceModel::from_matrix(
        matops::SymMatrix::diagonal(Eigen::Vector2d(1.0, 0.0)), "diag(1,0)");
    const auto y = cov(SpectrumSpec::flat(1));
    Matrix c(2, 1);
    c << rho, 0.0;
    const auto m = assemble(x, y, CouplingSpec::custom_matrix(c));
    ASSERT_EQ(m.L.rows(), 1);
    ASSERT_EQ(m.L.cols(), 2);
    EXPECT_NEAR(m.L(0, 0), rho, 1e-14);
    EXPECT_NEAR(m.L(0, 1), 0.0, 1e-14);
    EXPECT_NEAR(m.sigma_z(0, 0), 1 - rho * rho, 1e-14);
}

TEST(RegressionDecompose, CustomHalfIdentityOnSpikedMarginals) {
    const auto x = cov(SpectrumSpec::spiked(6, 2, 5.0), 11);
    const auto y = cov(SpectrumSpec::spiked(4, 1, 3.0, 2.0), 12);
    const Matrix c = 0.5 * Matrix::Identity(6, 4);
    const auto m = assemble(x, y, CouplingSpec::custom_matrix(c));
    // Direct arithmetic oracle: Sxy = Sx^1/2 C Sy^1/2 with sqrt from Eigen,
    // L = Sxy^T Sx^-1 (Sx is invertible here), Sz = Sy - L Sx L^T.
    const Eigen::SelfAdjointEigenSolver<Matrix> ex(x.matrix().matrix());
    const Eigen::SelfAdjointEigenSolver<Matrix> ey(y.matrix().matrix());
    const Matrix sxy = ex.operatorSqrt() * c * ey.operatorSqrt();
    EXPECT_LE(max_abs(m.sigma_xy - sxy), 1e-12);
    const Matrix L = sxy.transpose() * x.matrix().matrix().inverse();
    EXPECT_LE(max_abs(m.L - L), 1e-10);
    const Matrix sz = y.matrix().matrix() - L * x.matrix().matrix() * L.transpose();
    EXPECT_LE(max_abs(m.sigma_z.matrix() - sz), 1e-10);
    expect_invariants(m);
}

TEST(RegressionDecompose, IdenticalPathwayIsProjector) {
    const auto s = spectra::CovarianceModel::from_matrix(
        matops::SymMatrix::symmetrized(testing_support::random_psd(6, 3, 4)), "rank3");
    const auto m = assemble_identical(s);
    EXPECT_LE(max_abs(m.L * m.L - m.L), 1e-10);
    EXPECT_LE(max_abs(m.L * s.matrix().matrix() - s.matrix().matrix()), 1e-10);
    EXPECT_EQ(max_abs(m.sigma_z.matrix()), 0.0);
    const auto rd = regression_decompose(s, s, s.matrix().matrix());
    EXPECT_LE(max_abs(rd.sigma_z.matrix()), 1e-10 * s.op_norm());
}

TEST(RegressionDecompose, RejectsInfeasibleCross) {
    const auto id = cov(SpectrumSpec::flat(2));
    EXPECT_THROW(regression_decompose(id, id, 2.0 * Matrix::Identity(2, 2)), NotPSD);
    EXPECT_THROW(regression_decompose(id, id, Matrix::Identity(3, 2)), ShapeError);
}

TEST(CouplingSpec, Validation) {
    EXPECT_THROW(CouplingSpec::aligned(-0.1), InvalidCoupling);
    EXPECT_THROW(CouplingSpec::aligned(1.0), InvalidCoupling);
    EXPECT_NEAR(CouplingSpec::aligned(0.9999999999).rho, kMaxCouplingNorm, 0.0);
    const auto id = cov(SpectrumSpec::flat(2));
    EXPECT_THROW(assemble(id, id, CouplingSpec::custom_matrix(1.5 * Matrix::Identity(2, 2))),
                 InvalidCoupling);
    EXPECT_THROW(assemble(id, id, CouplingSpec::custom_matrix(Matrix::Identity(3, 2))),
                 InvalidCoupling);
}

TEST(Assemble, AlignedCrossNormBound) {
    for (double rho : {0.1, 0.5, 0.9, 0.99}) {
        const auto x = cov(SpectrumSpec::poly(7, 1.2, 3.0), 21);
        const auto y = cov(SpectrumSpec::exp_decay(5, 0.4), 22);
        const auto m = assemble(x, y, CouplingSpec::aligned(rho));
        const double n = matops::operator_norm(m.sigma_xy, matops::NormMethod::exact);
        EXPECT_LE(n, rho * std::sqrt(x.op_norm() * y.op_norm()) + 1e-10);
        // Top eigenvectors are coupled, so the bound is attained.
        EXPECT_NEAR(n, rho * std::sqrt(x.op_norm() * y.op_norm()), 1e-10);
        expect_invariants(m);
    }
}

TEST(Assemble, RandomModelsSatisfyDecompositionIdentity) {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        const int dx = 2 + static_cast<int>(seed % 9);
        const int dy = 1 + static_cast<int>((seed * 5) % 7);
        const auto x = spectra::CovarianceModel::from_matrix(
            matops::SymMatrix::symmetrized(testing_support::random_psd(dx, 1 + seed % dx, seed)), "x");
        const auto y = cov(SpectrumSpec::poly(dy, 0.7), seed + 1);
        Matrix c = testing_support::gaussian_matrix(dx, dy, 300 + seed);
        c *= 0.97 / matops::operator_norm(c, matops::NormMethod::exact);
        const auto m = assemble(x, y, CouplingSpec::custom_matrix(c));
        expect_invariants(m);
    }
}

TEST(Assemble, EmpiricalBlocksMatchModel) {
    const auto x = cov(SpectrumSpec::spiked(3, 1, 4.0), 5);
    const auto y = cov(SpectrumSpec::flat(2, 2.0));
    const auto m = assemble(x, y, CouplingSpec::aligned(0.8));
    const Eigen::Index N = 100000;
    const auto batch = samplers::sample_joint_gaussian(m, N, 17);
    const Matrix& X = batch.X;
    const Matrix& Y = batch.Y;
    auto check_block = [&](const Matrix& A, const Matrix& B, const Matrix& target) {
        for (Eigen::Index i = 0; i < target.rows(); ++i) {
            for (Eigen::Index j = 0; j < target.cols(); ++j) {
                const Eigen::ArrayXd prod = A.col(i).array() * B.col(j).array();
                const double mean = prod.mean();
                const double sd = std::sqrt((prod - mean).square().sum() / (N - 1));
                EXPECT_NEAR(mean, target(i, j), 5 * sd / std::sqrt(double(N)));
            }
        }
    };
    check_block(X, X, x.matrix().matrix());
    check_block(Y, Y, y.matrix().matrix());
    check_block(X, Y, m.sigma_xy);
}
