#include "crosscov/bounds.hpp"

#include "crosscov/errors.hpp"
#include "crosscov/random.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace crosscov::bounds {

void BoundInputs::validate(bool uses_u) const {
    auto finite_at_least = [](double v, double lo) { return std::isfinite(v) && v >= lo; };
    if (!finite_at_least(k_x, 1.0) || !finite_at_least(k_y, 1.0)) {
        throw InvalidArgument("sub-Gaussian constants must be >= 1");
    }
    if (!(opnorm_x > 0.0) || !(opnorm_y > 0.0) || !std::isfinite(opnorm_x) ||
        !std::isfinite(opnorm_y)) {
        throw InvalidArgument("operator norms must be positive and finite");
    }
    // Ranks computed as tr/max can land a few ulps below 1.
    if (!finite_at_least(r_x, 1.0 - 1e-9) || !finite_at_least(r_y, 1.0 - 1e-9)) {
        throw InvalidArgument("effective ranks must be >= 1");
    }
    if (!finite_at_least(N, 1.0)) {
        throw InvalidArgument("N must be >= 1");
    }
    if (uses_u && !finite_at_least(u, 1.0)) {
        throw InvalidArgument("u must be >= 1");
    }
    if ((d_x && r_x > *d_x * (1.0 + 1e-12)) || (d_y && r_y > *d_y * (1.0 + 1e-12))) {
        throw InvalidArgument("effective rank exceeds the ambient dimension");
    }
}

RateTerms rate_terms(double r_x, double r_y, double N) {
    return {std::sqrt((r_x + r_y) / N), std::sqrt(r_x * r_y) / N};
}

double hp_predictor(double r_x, double r_y, double N, double u) {
    return std::sqrt((r_x + r_y + u) / N) + std::sqrt((r_x + u) * (r_y + u)) / N;
}

double hp_upper_rate(const BoundInputs& in) {
    in.validate(true);
    return in.k_x * in.k_y * std::sqrt(in.opnorm_x * in.opnorm_y) *
           hp_predictor(in.r_x, in.r_y, in.N, in.u);
}

double expectation_rate(const BoundInputs& in) {
    in.validate(false);
    const RateTerms t = rate_terms(in.r_x, in.r_y, in.N);
    return in.k_x * in.k_y * std::sqrt(in.opnorm_x * in.opnorm_y) * (t.sqrt_term + t.product_term);
}

double gaussian_two_sided_rate(double opnorm_x, double opnorm_y, double r_x, double r_y,
                               double N) {
    BoundInputs in;
    in.opnorm_x = opnorm_x;
    in.opnorm_y = opnorm_y;
    in.r_x = r_x;
    in.r_y = r_y;
    in.N = N;
    return expectation_rate(in);
}

ComplexityEstimate gaussian_complexity_mc(const matops::Matrix& points, std::size_t reps,
                                          std::uint64_t seed) {
    if (points.rows() < 1 || points.cols() < 1) {
        throw InvalidArgument("index set must be nonempty");
    }
    if (reps < 10000) {
        throw InvalidArgument("gaussian_complexity_mc needs reps >= 1e4");
    }
    const Eigen::Index dim = points.cols();
    random::Stream stream(seed, 0, random::Role::complexity);
    // Blocks of draws keep the projection a matrix product.
    constexpr std::size_t block = 1024;
    std::vector<double> sups;
    sups.reserve(reps);
    matops::Matrix g;
    for (std::size_t done = 0; done < reps; done += block) {
        const auto rows = static_cast<Eigen::Index>(std::min(block, reps - done));
        g.resize(rows, dim);
        for (Eigen::Index i = 0; i < rows; ++i) {
            for (Eigen::Index j = 0; j < dim; ++j) {
                g(i, j) = stream.normal();
            }
        }
        const matops::Matrix proj = g * points.transpose();
        for (Eigen::Index i = 0; i < rows; ++i) {
            sups.push_back(proj.row(i).cwiseAbs().maxCoeff());
        }
    }
    double sum = 0.0;
    for (double s : sups) sum += s;
    const double n = static_cast<double>(reps);
    const double mean = sum / n;
    double ss = 0.0;
    for (double s : sups) ss += (s - mean) * (s - mean);
    return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

IndexSetSummary summarize_index_set(matops::Matrix points, std::size_t reps, std::uint64_t seed) {
    if (points.rows() < 1) {
        throw InvalidArgument("index set must be nonempty");
    }
    IndexSetSummary s;
    s.rad = points.rowwise().norm().maxCoeff();
    if (points.rows() == 1) {
        const double two_over_pi = 2.0 / std::numbers::pi;
        s.gamma = s.rad * std::sqrt(two_over_pi);
        s.gamma_se = 0.0;
        s.stable_dim = s.rad > 0.0 ? two_over_pi : 0.0;
    } else {
        const ComplexityEstimate est = gaussian_complexity_mc(points, reps, seed);
        s.gamma = est.gamma;
        s.gamma_se = est.se;
        s.stable_dim = s.rad > 0.0 ? (s.gamma / s.rad) * (s.gamma / s.rad) : 0.0;
    }
    s.points = std::move(points);
    return s;
}

IndexSetSummary ellipsoid_envelope(const spectra::CovarianceModel& sigma) {
    IndexSetSummary s;
    s.rad = std::sqrt(sigma.op_norm());
    s.gamma = std::sqrt(sigma.trace());
    s.stable_dim = sigma.eff_rank();
    return s;
}

double thm2_rate(const IndexSetSummary& T, const IndexSetSummary& S, double k_z, double k_w,
                 double N, double u) {
    if (T.rad == 0.0 || S.rad == 0.0) {
        return 0.0;
    }
    if (!(N >= 1.0) || !(u >= 1.0)) {
        throw InvalidArgument("thm2_rate needs N >= 1 and u >= 1");
    }
    const double dt = T.stable_dim;
    const double ds = S.stable_dim;
    return k_z * k_w * T.rad * S.rad *
           (std::sqrt((dt + ds + u) / N) + std::sqrt((dt + u) * (ds + u)) / N);
}

double isserlis_variance(const matops::Matrix& sigma_x, const matops::Matrix& sigma_y,
                         const matops::Matrix& sigma_xy, const matops::Vector& v,
                         const matops::Vector& h) {
    if (std::abs(v.norm() - 1.0) > 1e-10 || std::abs(h.norm() - 1.0) > 1e-10) {
        throw InvalidDirection("isserlis_variance needs unit directions v and h");
    }
    if (v.size() != sigma_x.rows() || h.size() != sigma_y.rows() ||
        sigma_xy.rows() != sigma_x.rows() || sigma_xy.cols() != sigma_y.rows()) {
        throw ShapeError("direction or covariance shapes do not match");
    }
    const double a = v.dot(sigma_x * v);
    const double b = h.dot(sigma_y * h);
    const double c = v.dot(sigma_xy * h);
    return isserlis_variance_scalar(a, b, c);
}

double lower_bound_rate_lemma(double opnorm_x, double r_x, double opnorm_p, double r_p,
                              double N) {
    if (!(opnorm_p > 0.0)) {
        throw InvalidArgument("lower_bound_rate_lemma needs a nonzero P");
    }
    BoundInputs in;
    in.opnorm_x = opnorm_x;
    in.opnorm_y = opnorm_p;
    in.r_x = r_x;
    in.r_y = r_p;
    in.N = N;
    return expectation_rate(in);
}

}  // namespace crosscov::bounds
