#pragma once

#include "crosscov/matops.hpp"
#include "crosscov/spectra.hpp"

#include <cstdint>
#include <optional>

namespace crosscov::bounds {

/// Symbols of the cross-covariance deviation rates. All evaluators below
/// are constant-free: universal constants are left to ratio statistics.
struct BoundInputs {
    double k_x = 1.0;
    double k_y = 1.0;
    double opnorm_x = 1.0;
    double opnorm_y = 1.0;
    double r_x = 1.0;
    double r_y = 1.0;
    double N = 1.0;
    double u = 1.0;
    std::optional<double> d_x;  // ambient dimensions, checked when known
    std::optional<double> d_y;

    /// Throws InvalidArgument when a field is out of range.
    void validate(bool uses_u) const;
};

/// K_X K_Y sqrt(|Sx||Sy|) (sqrt((r_X + r_Y + u)/N) + sqrt((r_X + u)(r_Y + u))/N).
double hp_upper_rate(const BoundInputs& in);

/// K_X K_Y sqrt(|Sx||Sy|) (sqrt((r_X + r_Y)/N) + sqrt(r_X r_Y)/N).
double expectation_rate(const BoundInputs& in);

/// sqrt(|Sx||Sy|) (sqrt((r_X + r_Y)/N) + sqrt(r_X r_Y)/N), the two-sided
/// Gaussian reference rate.
double gaussian_two_sided_rate(double opnorm_x, double opnorm_y, double r_x, double r_y,
                               double N);

/// The two terms of the constant-free rate, without the norm prefactor.
struct RateTerms {
    double sqrt_term;  // sqrt((r_X + r_Y)/N)
    double product_term;  // sqrt(r_X r_Y)/N
};
RateTerms rate_terms(double r_x, double r_y, double N);

/// Shape of the high-probability predictor in u, without K or norm factors.
double hp_predictor(double r_x, double r_y, double N, double u);

/// Finite index set with its geometric summaries.
struct IndexSetSummary {
    matops::Matrix points;  // one point per row; may be empty for analytic summaries
    double rad = 0.0;
    double gamma = 0.0;
    double gamma_se = 0.0;
    double stable_dim = 0.0;
};

struct ComplexityEstimate {
    double gamma;
    double se;
};

/// Monte Carlo estimate of E max_v |<g, v>| over the rows of `points`.
/// Throws InvalidArgument for an empty set or reps < 1e4.
ComplexityEstimate gaussian_complexity_mc(const matops::Matrix& points, std::size_t reps,
                                          std::uint64_t seed);

/// rad, gamma and d = (gamma / rad)^2. A single point uses the closed form
/// gamma = |v| sqrt(2/pi), d = 2/pi.
IndexSetSummary summarize_index_set(matops::Matrix points, std::size_t reps, std::uint64_t seed);

/// Analytic envelope of the ellipsoid Sigma^{1/2} S^{d-1}: rad = |Sigma|^{1/2},
/// gamma <= tr(Sigma)^{1/2}, so d = r(Sigma).
IndexSetSummary ellipsoid_envelope(const spectra::CovarianceModel& sigma);

/// K_Z K_W rad(T) rad(S) (sqrt((d(T)+d(S)+u)/N) + sqrt((d(T)+u)(d(S)+u))/N).
/// Returns 0 when either radius is 0.
double thm2_rate(const IndexSetSummary& T, const IndexSetSummary& S, double k_z, double k_w,
                 double N, double u);

/// Var(<X,v><Y,h>) for jointly Gaussian (X, Y):
/// (v^T Sx v)(h^T Sy h) + (v^T Sxy h)^2. Throws InvalidDirection unless
/// |v| = |h| = 1 within 1e-10.
double isserlis_variance(const matops::Matrix& sigma_x, const matops::Matrix& sigma_y,
                         const matops::Matrix& sigma_xy, const matops::Vector& v,
                         const matops::Vector& h);

/// Scalar form with a = v^T Sx v, b = h^T Sy h, c = v^T Sxy h.
inline double isserlis_variance_scalar(double var_a, double var_b, double cov_ab) {
    return var_a * var_b + cov_ab * cov_ab;
}

/// (|Sx| |P|)^{1/2} (sqrt((r_X + r_P)/N) + sqrt(r_X r_P)/N) for nonzero
/// P = L Sx L^T. Throws InvalidArgument when opnorm_p <= 0.
double lower_bound_rate_lemma(double opnorm_x, double r_x, double opnorm_p, double r_p, double N);

}  // namespace crosscov::bounds
