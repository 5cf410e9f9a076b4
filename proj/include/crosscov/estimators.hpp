#pragma once

#include "crosscov/joint_model.hpp"
#include "crosscov/matops.hpp"
#include "crosscov/samplers.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace crosscov::estimators {

/// (1/N) sum_i X_i Y_i^T.
matops::Matrix sample_cross_cov(const samplers::SampleBatch& batch);

/// || (1/N) sum_i X_i Y_i^T - sigma_xy ||. Throws ShapeError.
double deviation_norm(const samplers::SampleBatch& batch, const matops::Matrix& sigma_xy,
                      matops::NormMethod method = matops::NormMethod::automatic);

/// || (1/N) sum_i X_i X_i^T - Sigma || computed from X alone. This is the
/// dedicated sample-covariance route the X = Y case must reproduce.
double covariance_deviation_norm(const matops::Matrix& X, const matops::SymMatrix& sigma,
                                 matops::NormMethod method = matops::NormMethod::automatic);

struct QuantileEstimate {
    double u;
    double level;  // 1 - e^{-u}
    double value;
    /// e^{-u} * reps >= 20; unreliable values are still reported but flagged.
    bool reliable;
};

/// Upper order statistic of rank ceil(reps * (1 - e^{-u})), no interpolation.
/// Throws InvalidArgument for u < 1 or an empty sample.
QuantileEstimate tail_quantile(std::span<const double> sorted_values, double u);

struct DeviationStats {
    std::size_t reps = 0;
    double mean = 0.0;
    double std_error = 0.0;
    std::vector<QuantileEstimate> quantiles;  // in u-grid order
    std::vector<double> per_rep;  // replicate order

    /// Quantile at level u, if it was requested.
    std::optional<QuantileEstimate> quantile(double u) const;
};

struct MeanSE {
    double mean;
    double se;
};

/// Mean and standard error (sample sd / sqrt(n)), summed in index order.
MeanSE mean_and_se(std::span<const double> values);

/// Summary of replicate values; quantiles for every u in `u_grid`.
DeviationStats summarize(std::vector<double> per_rep, std::span<const double> u_grid,
                         bool keep_per_rep = true);

struct MonteCarloOptions {
    Eigen::Index N = 1;
    std::size_t reps = 50;
    std::uint64_t seed = 0;
    std::vector<double> u_grid;
    matops::NormMethod method = matops::NormMethod::automatic;
    unsigned threads = 1;
    bool keep_per_rep = true;
};

/// Monte Carlo distribution of the deviation norm over replicates.
/// Replicate r draws from substreams (seed, r); results are aggregated in
/// replicate order, so the output does not depend on `threads`.
/// Throws InvalidArgument for reps < 50.
DeviationStats mc_deviation(const samplers::PairSource& source, const MonteCarloOptions& options);

struct DeviationParts {
    double norm_a;  // ||A_N||, A_N = (S_XX - Sigma_X) L^T
    double norm_b;  // ||B_N||, B_N = (1/N) sum X_i Z_i^T
    double norm_total;  // ||A_N + B_N||
    double identity_residual;  // max |A_N + B_N - (S_XY - Sigma_XY)|
};

/// Splits the deviation of a joint Gaussian batch into its correlated part
/// and its independent-residual part. Throws MissingResiduals.
DeviationParts decompose_deviation(const joint::JointGaussianModel& model,
                                   const samplers::SampleBatch& batch,
                                   matops::NormMethod method = matops::NormMethod::automatic);

}  // namespace crosscov::estimators
