#pragma once

#include "crosscov/bounds.hpp"
#include "crosscov/estimators.hpp"
#include "crosscov/joint_model.hpp"
#include "crosscov/samplers.hpp"
#include "crosscov/spectra.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace crosscov::experiments {

struct SamplerSpec {
    samplers::FamilyKind family = samplers::FamilyKind::gaussian;
    samplers::PairMode mode = samplers::PairMode::joint;
};

struct MarginalSpec {
    spectra::SpectrumSpec spectrum;
    std::optional<std::uint64_t> rotation_seed;
};

struct MarginalPair {
    std::string label;
    MarginalSpec x;
    MarginalSpec y;
};

/// Grid over marginals x couplings x samplers x N, enumerated in that
/// nesting order (N innermost), each axis in declaration order.
struct SweepConfig {
    std::vector<Eigen::Index> N;
    std::vector<MarginalPair> marginals;
    std::vector<joint::CouplingSpec> couplings;
    std::vector<SamplerSpec> samplers;
    std::size_t reps = 200;
    std::uint64_t seed = 0;
    std::vector<double> u_grid;
    matops::NormMethod method = matops::NormMethod::automatic;

    /// Throws ConfigError: empty axes, reps < 50, u < 1, a non-Gaussian
    /// joint sampler, or a coupling other than independent combined with
    /// a sub-Gaussian mode.
    void validate() const;
    std::size_t size() const;
};

struct GridPoint {
    std::size_t index;
    std::size_t marginal;
    std::size_t coupling;
    std::size_t sampler;
    Eigen::Index N;
};

std::vector<GridPoint> enumerate_grid(const SweepConfig& config);

struct SweepRecord {
    std::size_t index = 0;
    std::string marginal_label;
    std::string coupling_label;
    std::string family;
    std::string mode;
    Eigen::Index N = 0;
    double r_x = 0.0;
    double r_y = 0.0;
    double opnorm_x = 0.0;
    double opnorm_y = 0.0;
    estimators::DeviationStats stats;
    double expectation_rate = 0.0;  // with K = sqrt(8/3) per side
    double two_sided_rate = 0.0;  // constant-free Gaussian rate
    std::vector<double> hp_rates;  // per u in the grid
    double ratio_expectation = 0.0;
    double ratio_two_sided = 0.0;
    double ratio_two_sided_se = 0.0;  // delta method on the replicate mean
    std::vector<double> hp_ratios;  // quantile / hp rate per u
    double wall_seconds = 0.0;
    std::string error_code;  // empty on success
    std::string error_message;

    bool failed() const noexcept { return !error_code.empty(); }
};

/// Monte Carlo statistics and rates for every grid point. Every cell uses
/// the master seed, so cells share common random numbers. Failures are
/// captured per cell. Output order is grid order for any `threads`.
std::vector<SweepRecord> run_sweep(const SweepConfig& config, unsigned threads = 1);

/// max / min of ratio_two_sided over non-failed records.
double ratio_spread(const std::vector<SweepRecord>& records);

struct LineFit {
    double slope;
    double intercept;
    double r_squared;
};

/// Ordinary least squares of y on x. Throws InvalidArgument for fewer
/// than two points or constant x.
LineFit least_squares(std::span<const double> x, std::span<const double> y);

enum class Regime { sqrt_term, product_term };

struct ScalingFit {
    LineFit fit;
    Regime regime;
    double expected_slope;  // -1/2 or -1
    double min_dominance;  // smallest term ratio at the N endpoints
};

/// Term dominance at N: the larger of the two rate terms over the smaller,
/// and which one is larger.
std::pair<double, Regime> dominance(double r_x, double r_y, double N);

/// log(mean) against log(N). Needs >= 3 records that differ only in N.
/// Throws RegimeAmbiguous unless one rate term dominates the other by
/// `regime_factor` at both ends of the N range.
ScalingFit fit_scaling(const std::vector<SweepRecord>& records, double regime_factor = 4.0);

struct DependenceResult {
    std::vector<double> rhos;
    std::vector<estimators::DeviationStats> stats;
    double spread;  // max mean / min mean
};

/// Empirical mean deviation for aligned(rho) couplings of fixed Gaussian
/// marginals.
DependenceResult dependence_insensitivity(const spectra::CovarianceModel& sigma_x,
                                          const spectra::CovarianceModel& sigma_y,
                                          const std::vector<double>& rhos,
                                          const estimators::MonteCarloOptions& options);

struct PairedGap {
    double gap;  // mean(lhs - rhs)
    double se;  // SE of the paired differences
};

struct LowerBoundRecord {
    estimators::MeanSE a;
    estimators::MeanSE b;
    estimators::MeanSE total;
    PairedGap total_minus_max;  // E|A+B| - max(E|A|, E|B|)
    PairedGap total_minus_half_sum;  // E|A+B| - (E|A| + E|B|)/2
    double max_identity_residual;
    std::vector<estimators::DeviationParts> per_rep;
};

/// E|A_N|, E|B_N|, E|A_N + B_N| over Gaussian replicates.
LowerBoundRecord lower_bound_decomposition(const joint::JointGaussianModel& model,
                                           const estimators::MonteCarloOptions& options);

struct CorrelationCheck {
    estimators::MeanSE lhs;  // E |X| |LX|
    double rhs;  // E|X| E|LX|
    double gap_se;  // delta-method SE of lhs - rhs
    estimators::MeanSE norm_x;  // E |X|
    estimators::MeanSE norm_lx;  // E |LX|
    double norm_x_lower;  // sqrt(tr - |Sigma|)
    double norm_x_upper;  // sqrt(tr)
};

/// Monte Carlo check of E|X||LX| >= E|X| E|LX| for X ~ N(0, Sigma_X).
CorrelationCheck correlation_inequality_check(const spectra::CovarianceModel& sigma_x,
                                              const matops::Matrix& L, std::size_t reps,
                                              std::uint64_t seed);

struct TailProfile {
    estimators::DeviationStats stats;
    std::vector<double> predictors;  // hp predictor per u
    LineFit fit;  // quantile against predictor
};

/// Regression of empirical tail quantiles on the constant-free hp predictor.
/// Throws InvalidArgument if any u fails the reliability rule.
TailProfile tail_profile(const samplers::PairSource& source,
                         const estimators::MonteCarloOptions& options);

/// Same regression on precomputed quantiles.
LineFit fit_tail(std::span<const double> quantiles, std::span<const double> predictors);

struct FiniteSetRow {
    double u;
    estimators::QuantileEstimate quantile;
    double rate;  // thm2_rate at u
    double ratio;  // quantile / rate
};

struct FiniteSetRecord {
    std::string family;
    Eigen::Index N = 0;
    estimators::DeviationStats stats;
    std::vector<FiniteSetRow> rows;
    std::vector<double> per_rep_sup;
};

/// sup_{v in T, h in S} |(1/N) sum <Z_i,v><W_i,h> - E <Z,v><W,h>| for each
/// replicate, by brute force over all pairs. Throws InvalidArgument when
/// |T| |S| > 1e6.
double finite_set_sup(const matops::Matrix& Z, const matops::Matrix& W,
                      const matops::Matrix& expected_cross, const matops::Matrix& T,
                      const matops::Matrix& S);

FiniteSetRecord finite_set_verification(const bounds::IndexSetSummary& T,
                                        const bounds::IndexSetSummary& S,
                                        samplers::IsotropicFamily family, samplers::PairMode mode,
                                        const estimators::MonteCarloOptions& options);

/// Roughly uniform points on the unit sphere in R^3 (Fibonacci lattice).
matops::Matrix fibonacci_sphere(int count);

struct RecoveryCheck {
    std::vector<double> cross_path;
    std::vector<double> covariance_path;
    bool bit_identical;
};

/// Runs the shared_source cross-covariance pipeline with equal marginals
/// next to the dedicated sample-covariance route on the same draws.
RecoveryCheck covariance_recovery(const spectra::CovarianceModel& sigma,
                                  samplers::IsotropicFamily family,
                                  const estimators::MonteCarloOptions& options);

struct IsserlisCheck {
    double var_x;  // v^T Sx v
    double var_y;  // h^T Sy h
    double cov_xy;  // v^T Sxy h
    double closed_form;
    double mc_variance;
    double mc_se;  // SE of the sample variance, sqrt((m4 - s^4) / n)
    bool lower_ok;  // var_x var_y <= closed form
    bool upper_ok;  // closed form <= 2 var_x var_y + 1e-12
};

/// Closed-form Var(<X,v><Y,h>) next to its Monte Carlo estimate from
/// `reps` draws of the joint Gaussian model.
IsserlisCheck isserlis_check(const joint::JointGaussianModel& model, const matops::Vector& v,
                             const matops::Vector& h, std::size_t reps, std::uint64_t seed);

struct IsserlisTriple {
    joint::JointGaussianModel model;
    matops::Vector v;
    matops::Vector h;
};

/// Random rotated marginals in R^dim, a random custom coupling with norm
/// below 0.95 and random unit directions, all derived from `seed`.
IsserlisTriple random_isserlis_triple(int dim, std::uint64_t seed);

/// One-dimensional joint model with the given variances and covariance.
joint::JointGaussianModel scalar_model(double var_x, double var_y, double cov_xy);

}  // namespace crosscov::experiments
