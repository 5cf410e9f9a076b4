#include "crosscov/errors.hpp"
#include "crosscov/spectra.hpp"
#include "helpers.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

using namespace crosscov;
using namespace crosscov::spectra;

TEST(Eigenvalues, Examples) {
    EXPECT_EQ(eigenvalues(SpectrumSpec::flat(3, 2.0)), (std::vector<double>{2, 2, 2}));
    const auto p = eigenvalues(SpectrumSpec::poly(3, 1.0));
    ASSERT_EQ(p.size(), 3u);
    EXPECT_DOUBLE_EQ(p[0], 1.0);
    EXPECT_DOUBLE_EQ(p[1], 0.5);
    EXPECT_DOUBLE_EQ(p[2], 1.0 / 3.0);
    EXPECT_EQ(eigenvalues(SpectrumSpec::spiked(4, 1, 10.0)), (std::vector<double>{10, 1, 1, 1}));
}

TEST(Eigenvalues, ExpDecayAndCustomAreSortedDescending) {
    const auto e = eigenvalues(SpectrumSpec::exp_decay(4, 0.5, 3.0));
    for (int j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(e[j], 3.0 * std::exp(-0.5 * j));
    EXPECT_EQ(eigenvalues(SpectrumSpec::custom({1, 5, 0, 2})), (std::vector<double>{5, 2, 1, 0}));
}

TEST(Eigenvalues, InvalidSpecsThrow) {
    EXPECT_THROW(eigenvalues(SpectrumSpec::custom({})), InvalidSpectrum);
    EXPECT_THROW(eigenvalues(SpectrumSpec::custom({0, 0})), InvalidSpectrum);
    EXPECT_THROW(eigenvalues(SpectrumSpec::custom({1, -1})), InvalidSpectrum);
    EXPECT_THROW(eigenvalues(SpectrumSpec::poly(4, 0.0)), InvalidSpectrum);
    EXPECT_THROW(eigenvalues(SpectrumSpec::exp_decay(4, -1.0)), InvalidSpectrum);
    EXPECT_THROW(eigenvalues(SpectrumSpec::spiked(4, 1, 0.5)), InvalidSpectrum);
    EXPECT_THROW(eigenvalues(SpectrumSpec::spiked(4, 5, 2.0)), InvalidSpectrum);
    EXPECT_THROW(eigenvalues(SpectrumSpec::flat(0)), InvalidSpectrum);
    EXPECT_THROW(eigenvalues(SpectrumSpec::flat(3, 0.0)), InvalidSpectrum);
}

TEST(BuildCovariance, Examples) {
    const auto flat = build_covariance(SpectrumSpec::flat(5));
    EXPECT_DOUBLE_EQ(flat.eff_rank(), 5.0);
    EXPECT_TRUE(flat.is_diagonal());

    for (std::optional<std::uint64_t> rot : {std::optional<std::uint64_t>{}, std::optional<std::uint64_t>{3},
                                             std::optional<std::uint64_t>{99}}) {
        const auto s = build_covariance(SpectrumSpec::spiked(4, 1, 10.0), rot);
        EXPECT_NEAR(s.eff_rank(), 1.3, 1e-15);
        EXPECT_NEAR(matops::effective_rank(s.matrix()), 1.3, 1e-8);
    }

    double h = 0.0;
    for (int j = 1; j <= 100; ++j) h += 1.0 / (static_cast<double>(j) * j);
    const auto poly = build_covariance(SpectrumSpec::poly(100, 2.0));
    EXPECT_NEAR(poly.eff_rank(), h, 1e-12);
    EXPECT_NEAR(poly.eff_rank(), 1.63498, 1e-5);
}

TEST(BuildCovariance, RotationPreservesEffectiveRank) {
    const std::vector<SpectrumSpec> specs{SpectrumSpec::poly(60, 1.5), SpectrumSpec::exp_decay(40, 0.2),
                                          SpectrumSpec::spiked(30, 3, 7.0, 0.5),
                                          SpectrumSpec::custom({4, 3, 0.1, 0})};
    for (const auto& spec : specs) {
        const double plain = build_covariance(spec).eff_rank();
        const auto rotated = build_covariance(spec, 1234);
        EXPECT_FALSE(rotated.is_diagonal());
        const double from_matrix = matops::effective_rank(rotated.matrix());
        EXPECT_NEAR(from_matrix, plain, 1e-8 * plain) << spec.label();
        EXPECT_NEAR(rotated.eff_rank(), analytic_effective_rank(spec), 1e-8);
    }
}

TEST(BuildCovariance, RotatedMatrixHasSpecSpectrum) {
    const auto spec = SpectrumSpec::poly(12, 1.0, 2.0);
    const auto model = build_covariance(spec, 5);
    const auto expected = eigenvalues(spec);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(model.matrix().matrix());
    for (int j = 0; j < 12; ++j) {
        EXPECT_NEAR(es.eigenvalues()(11 - j), expected[static_cast<std::size_t>(j)], 1e-12);
    }
    const auto& s = model.sqrt().matrix();
    EXPECT_LE(testing_support::max_abs(s * s - model.matrix().matrix()), 1e-12);
}

TEST(BuildCovariance, EffRankIsTraceOverNorm) {
    const auto model = build_covariance(SpectrumSpec::exp_decay(25, 0.3, 4.0), 8);
    EXPECT_NEAR(model.eff_rank(), model.trace() / model.op_norm(), 1e-10 * model.eff_rank());
    EXPECT_GE(model.eff_rank(), 1.0);
    EXPECT_LE(model.eff_rank(), 25.0);
}

TEST(RandomOrthogonal, DeterministicAndOrthogonal) {
    const auto a = random_orthogonal(20, 42);
    const auto b = random_orthogonal(20, 42);
    ASSERT_EQ(a.size(), b.size());
    EXPECT_EQ(std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())), 0);
    EXPECT_LE(testing_support::max_abs(a.transpose() * a - Eigen::MatrixXd::Identity(20, 20)), 1e-12);
    EXPECT_GT(testing_support::max_abs(a - random_orthogonal(20, 43)), 1e-3);
}

TEST(RandomOrthogonal, FirstColumnLooksHaar) {
    // For Haar Q, E Q_11^2 = 1/d; average over seeds.
    const int d = 6;
    const int n = 4000;
    double acc = 0.0, acc2 = 0.0;
    for (int s = 0; s < n; ++s) {
        const double q = random_orthogonal(d, static_cast<std::uint64_t>(s))(0, 0);
        acc += q * q;
        acc2 += q * q * q * q;
    }
    const double mean = acc / n;
    const double se = std::sqrt((acc2 / n - mean * mean) / n);
    EXPECT_NEAR(mean, 1.0 / d, 5 * se);
}

TEST(SpectrumSpec, Labels) {
    EXPECT_EQ(SpectrumSpec::poly(100, 2.0).label(), "poly(d=100,alpha=2)");
    EXPECT_EQ(build_covariance(SpectrumSpec::flat(3), 7).label(), "flat(d=3)@rot7");
}

TEST(CovarianceModel, ZeroMatrixRejected) {
    EXPECT_THROW(CovarianceModel::from_matrix(matops::SymMatrix::zero(3), "zero"), ZeroCovariance);
}
