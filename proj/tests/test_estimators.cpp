#include "crosscov/errors.hpp"
#include "crosscov/estimators.hpp"
#include "crosscov/experiments.hpp"
#include "helpers.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

using namespace crosscov;
using namespace crosscov::estimators;
using matops::Matrix;
using spectra::SpectrumSpec;

namespace {

spectra::CovarianceModel cov(const SpectrumSpec& s, std::optional<std::uint64_t> rot = {}) {
    return spectra::build_covariance(s, rot);
}

samplers::SampleBatch batch_of(Matrix X, Matrix Y) {
    samplers::SampleBatch b;
    b.X = std::move(X);
    b.Y = std::move(Y);
    return b;
}

// E|W/k - 1| for W ~ chi^2_k, from the mean absolute deviation of a
// Gamma(k/2, 2) law: 4 a^a e^-a / Gamma(a) with a = k/2.
double chi2_mean_abs_dev(double k) {
    const double a = 0.5 * k;
    return 4.0 * std::exp(a * std::log(a) - a - std::lgamma(a)) / k;
}

MonteCarloOptions opts(Eigen::Index N, std::size_t reps, std::uint64_t seed) {
    MonteCarloOptions o;
    o.N = N;
    o.reps = reps;
    o.seed = seed;
    o.u_grid = {1.0, 2.0, 3.0};
    return o;
}

}  // namespace

TEST(SampleCrossCov, SinglePairIsOuterProduct) {
    Matrix X(1, 2), Y(1, 2);
    X << 1, 0;
    Y << 0, 1;
    const Matrix s = sample_cross_cov(batch_of(X, Y));
    EXPECT_EQ(s(0, 1), 1.0);
    EXPECT_EQ(s(0, 0), 0.0);
    EXPECT_EQ(s(1, 0), 0.0);
    EXPECT_EQ(s(1, 1), 0.0);
}

TEST(SampleCrossCov, ScalarAverage) {
    Matrix X(2, 1), Y(2, 1);
    X << 1, -1;
    Y << 1, 3;
    EXPECT_DOUBLE_EQ(sample_cross_cov(batch_of(X, Y))(0, 0), -1.0);
}

TEST(SampleCrossCov, EqualInputsGiveSymmetricPsd) {
    const Matrix X = testing_support::gaussian_matrix(40, 6, 3);
    const Matrix s = sample_cross_cov(batch_of(X, X));
    EXPECT_LE(testing_support::max_abs(s - s.transpose()), 1e-14);
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (s + s.transpose()));
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
}

TEST(SampleCrossCov, RejectsMismatchedRows) {
    EXPECT_THROW(sample_cross_cov(batch_of(Matrix::Zero(3, 2), Matrix::Zero(2, 2))), ShapeError);
    EXPECT_THROW(sample_cross_cov(batch_of(Matrix::Zero(0, 2), Matrix::Zero(0, 2))), ShapeError);
}

TEST(DeviationNorm, ZeroAtTheSampleValue) {
    const Matrix X = testing_support::gaussian_matrix(20, 4, 5);
    const Matrix Y = testing_support::gaussian_matrix(20, 3, 6);
    const auto b = batch_of(X, Y);
    EXPECT_LE(deviation_norm(b, sample_cross_cov(b), matops::NormMethod::exact), 1e-15);
}

TEST(DeviationNorm, ScalarIsAbsoluteDifference) {
    Matrix X(3, 1), Y(3, 1);
    X << 1, 2, -1;
    Y << 2, 0.5, 4;
    const double mean = (2.0 + 1.0 - 4.0) / 3.0;
    Matrix sigma(1, 1);
    sigma << 0.25;
    EXPECT_NEAR(deviation_norm(batch_of(X, Y), sigma), std::abs(mean - 0.25), 1e-15);
}

TEST(DeviationNorm, EqualInputsMatchCovariancePath) {
    const auto sigma = cov(SpectrumSpec::poly(6, 1.0), 9);
    const Matrix X = testing_support::gaussian_matrix(30, 6, 8) * sigma.sqrt().matrix();
    const double cross = deviation_norm(batch_of(X, X), sigma.matrix().matrix(),
                                        matops::NormMethod::exact);
    const double direct = covariance_deviation_norm(X, sigma.matrix(), matops::NormMethod::exact);
    EXPECT_NEAR(cross, direct, 1e-13 * std::max(1.0, direct));
}

TEST(DeviationNorm, ShapeMismatchThrows) {
    const auto b = batch_of(Matrix::Zero(4, 3), Matrix::Zero(4, 2));
    EXPECT_THROW(deviation_norm(b, Matrix::Zero(2, 3)), ShapeError);
    EXPECT_THROW(covariance_deviation_norm(Matrix::Zero(4, 3), matops::SymMatrix::identity(2)),
                 ShapeError);
}

TEST(DeviationNorm, PowerOfTwoScalingIsExact) {
    const Matrix X = testing_support::gaussian_matrix(25, 5, 12);
    const Matrix Y = testing_support::gaussian_matrix(25, 4, 13);
    const Matrix sigma = testing_support::gaussian_matrix(5, 4, 14) * 0.1;
    for (auto method : {matops::NormMethod::exact, matops::NormMethod::power}) {
        const double base = deviation_norm(batch_of(X, Y), sigma, method);
        const double scaled = deviation_norm(batch_of(4.0 * X, Y), 4.0 * sigma, method);
        EXPECT_EQ(scaled, 4.0 * base);
    }
}

TEST(McDeviation, ScalarEqualInputsMatchChiSquare) {
    const auto model = joint::assemble_identical(cov(SpectrumSpec::flat(1)));
    const auto source = samplers::PairSource::gaussian(model);
    const auto stats = mc_deviation(source, opts(100, 2000, 1));
    const double exact = chi2_mean_abs_dev(100.0);
    EXPECT_NEAR(exact, 0.11265, 1e-5);
    EXPECT_NEAR(stats.mean, exact, 3.0 * stats.std_error);
}

TEST(McDeviation, IndependentScalarMeanIsHalfNormal) {
    const auto x = cov(SpectrumSpec::flat(1));
    const auto source = samplers::PairSource::gaussian(
        joint::assemble(x, x, joint::CouplingSpec::independent()));
    const auto stats = mc_deviation(source, opts(400, 4000, 2));
    const double clt = std::sqrt(2.0 / (std::numbers::pi * 400.0));
    EXPECT_NEAR(stats.mean, clt, 3.0 * stats.std_error + 0.01 * clt);
}

TEST(McDeviation, MeanDecreasesWithN) {
    const auto x = cov(SpectrumSpec::spiked(8, 2, 4.0));
    const auto source = samplers::PairSource::gaussian(
        joint::assemble(x, x, joint::CouplingSpec::aligned(0.5)));
    double prev = 1e300;
    for (Eigen::Index N : {64, 256, 1024}) {
        const double m = mc_deviation(source, opts(N, 200, 3)).mean;
        EXPECT_LT(m, prev);
        prev = m;
    }
}

TEST(McDeviation, QuantilesAreMonotoneInU) {
    const auto x = cov(SpectrumSpec::flat(4));
    const auto source = samplers::PairSource::gaussian(
        joint::assemble(x, x, joint::CouplingSpec::aligned(0.3)));
    auto o = opts(50, 1000, 4);
    o.u_grid = {1.0, 1.5, 2.0, 3.0, 4.0};
    const auto stats = mc_deviation(source, o);
    ASSERT_EQ(stats.quantiles.size(), 5u);
    for (std::size_t i = 1; i < stats.quantiles.size(); ++i) {
        EXPECT_GE(stats.quantiles[i].value, stats.quantiles[i - 1].value);
    }
    EXPECT_TRUE(stats.quantile(2.0).has_value());
    EXPECT_FALSE(stats.quantile(2.5).has_value());
}

TEST(McDeviation, ThreadCountDoesNotChangeResults) {
    const auto x = cov(SpectrumSpec::poly(10, 1.0), 3);
    const auto source = samplers::PairSource::gaussian(
        joint::assemble(x, x, joint::CouplingSpec::aligned(0.7)));
    auto o = opts(32, 120, 5);
    const auto one = mc_deviation(source, o);
    o.threads = 4;
    const auto four = mc_deviation(source, o);
    EXPECT_EQ(one.per_rep, four.per_rep);
    EXPECT_EQ(one.mean, four.mean);
    EXPECT_EQ(one.std_error, four.std_error);
    const auto again = mc_deviation(source, opts(32, 120, 5));
    EXPECT_EQ(one.per_rep, again.per_rep);
}

TEST(McDeviation, RequiresFiftyReplicates) {
    const auto x = cov(SpectrumSpec::flat(2));
    const auto source = samplers::PairSource::gaussian(joint::assemble_identical(x));
    EXPECT_THROW(mc_deviation(source, opts(10, 49, 0)), InvalidArgument);
    EXPECT_NO_THROW(mc_deviation(source, opts(10, 50, 0)));
}

TEST(TailQuantile, UsesUpperOrderStatistic) {
    std::vector<double> v(100);
    std::iota(v.begin(), v.end(), 1.0);
    const auto q1 = tail_quantile(v, 1.0);
    EXPECT_EQ(q1.value, 64.0);  // ceil(100 * 0.632...) = 64
    EXPECT_NEAR(q1.level, 1.0 - std::exp(-1.0), 1e-15);
    EXPECT_TRUE(q1.reliable);  // 36.8 >= 20
    const auto q2 = tail_quantile(v, 2.0);
    EXPECT_EQ(q2.value, 87.0);  // ceil(86.47) = 87
    EXPECT_FALSE(q2.reliable);  // 13.5 < 20
}

TEST(TailQuantile, ReliabilityBoundary) {
    std::vector<double> v(1000, 1.0);
    EXPECT_TRUE(tail_quantile(v, 3.0).reliable);  // 49.8
    EXPECT_FALSE(tail_quantile(v, 4.0).reliable);  // 18.3
    std::vector<double> big(10000, 1.0);
    EXPECT_TRUE(tail_quantile(big, 4.0).reliable);  // 183
}

TEST(TailQuantile, RejectsBadInput) {
    std::vector<double> v{1.0, 2.0};
    EXPECT_THROW(tail_quantile(v, 0.5), InvalidArgument);
    EXPECT_THROW(tail_quantile(std::vector<double>{}, 1.0), InvalidArgument);
}

TEST(MeanAndSe, MatchesTextbookFormula) {
    const std::vector<double> v{1.0, 2.0, 4.0, 7.0};
    const auto m = mean_and_se(v);
    EXPECT_DOUBLE_EQ(m.mean, 3.5);
    const double var = ((2.5 * 2.5) + (1.5 * 1.5) + (0.5 * 0.5) + (3.5 * 3.5)) / 3.0;
    EXPECT_NEAR(m.se, std::sqrt(var / 4.0), 1e-15);
}

TEST(Decompose, IndependentHasNoCorrelatedPart) {
    const auto x = cov(SpectrumSpec::spiked(6, 2, 5.0));
    const auto model = joint::assemble(x, x, joint::CouplingSpec::independent());
    const auto b = samplers::sample_joint_gaussian(model, 64, 7);
    const auto parts = decompose_deviation(model, b);
    EXPECT_EQ(parts.norm_a, 0.0);
    EXPECT_NEAR(parts.norm_total, parts.norm_b, 1e-12);
    EXPECT_LE(parts.identity_residual, 1e-12);
}

TEST(Decompose, IdenticalPathwayHasNoResidualPart) {
    const auto x = cov(SpectrumSpec::poly(5, 1.0), 2);
    const auto model = joint::assemble_identical(x);
    const auto b = samplers::sample_joint_gaussian(model, 64, 8);
    const auto parts = decompose_deviation(model, b);
    EXPECT_LE(parts.norm_b, 1e-12);
    EXPECT_NEAR(parts.norm_a, parts.norm_total, 1e-12);
}

TEST(Decompose, IdentityHoldsForAlignedCoupling) {
    const auto x = cov(SpectrumSpec::spiked(8, 2, 6.0), 4);
    const auto y = cov(SpectrumSpec::poly(8, 1.0), 5);
    const auto model = joint::assemble(x, y, joint::CouplingSpec::aligned(0.5));
    for (std::uint64_t r = 0; r < 5; ++r) {
        const auto b = samplers::sample_joint_gaussian(model, 100, 9, r);
        const auto parts = decompose_deviation(model, b);
        EXPECT_LE(parts.identity_residual, 1e-10);
        EXPECT_LE(parts.norm_total, parts.norm_a + parts.norm_b + 1e-12);
        EXPECT_NEAR(parts.norm_total,
                    deviation_norm(b, model.sigma_xy, matops::NormMethod::exact), 1e-10);
    }
}

TEST(Decompose, MissingResidualsThrows) {
    const auto x = cov(SpectrumSpec::flat(3));
    const auto model = joint::assemble(x, x, joint::CouplingSpec::aligned(0.2));
    auto b = samplers::sample_joint_gaussian(model, 10, 1);
    b.Z.reset();
    EXPECT_THROW(decompose_deviation(model, b), MissingResiduals);
}
