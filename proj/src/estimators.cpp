#include "crosscov/estimators.hpp"

#include "crosscov/errors.hpp"
#include "crosscov/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace crosscov::estimators {

using matops::Matrix;

Matrix sample_cross_cov(const samplers::SampleBatch& batch) {
    if (batch.X.rows() < 1 || batch.X.rows() != batch.Y.rows()) {
        throw ShapeError("batch needs N >= 1 paired rows");
    }
    Matrix s = batch.X.transpose() * batch.Y;
    s /= static_cast<double>(batch.X.rows());
    return s;
}

double deviation_norm(const samplers::SampleBatch& batch, const Matrix& sigma_xy,
                      matops::NormMethod method) {
    if (sigma_xy.rows() != batch.X.cols() || sigma_xy.cols() != batch.Y.cols()) {
        throw ShapeError("sigma_xy is " + std::to_string(sigma_xy.rows()) + "x" +
                         std::to_string(sigma_xy.cols()) + ", batch needs " +
                         std::to_string(batch.X.cols()) + "x" + std::to_string(batch.Y.cols()));
    }
    Matrix dev = sample_cross_cov(batch);
    dev -= sigma_xy;
    return matops::operator_norm(dev, method);
}

double covariance_deviation_norm(const Matrix& X, const matops::SymMatrix& sigma,
                                 matops::NormMethod method) {
    if (X.cols() != sigma.dim() || X.rows() < 1) {
        throw ShapeError("sample matrix does not match the covariance dimension");
    }
    Matrix s = X.transpose() * X;
    s /= static_cast<double>(X.rows());
    s -= sigma.matrix();
    return matops::operator_norm(s, method);
}

QuantileEstimate tail_quantile(std::span<const double> sorted_values, double u) {
    if (sorted_values.empty()) {
        throw InvalidArgument("quantile of an empty sample");
    }
    if (!(u >= 1.0)) {
        throw InvalidArgument("u-levels must be >= 1");
    }
    const double reps = static_cast<double>(sorted_values.size());
    const double tail = std::exp(-u);
    const double level = 1.0 - tail;
    auto rank = static_cast<std::size_t>(std::ceil(reps * level));
    rank = std::clamp<std::size_t>(rank, 1, sorted_values.size());
    return {u, level, sorted_values[rank - 1], tail * reps >= 20.0};
}

std::optional<QuantileEstimate> DeviationStats::quantile(double u) const {
    for (const auto& q : quantiles) {
        if (q.u == u) {
            return q;
        }
    }
    return std::nullopt;
}

MeanSE mean_and_se(std::span<const double> values) {
    const double n = static_cast<double>(values.size());
    if (values.empty()) {
        return {0.0, 0.0};
    }
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    const double mean = sum / n;
    if (values.size() < 2) {
        return {mean, 0.0};
    }
    double ss = 0.0;
    for (double v : values) {
        ss += (v - mean) * (v - mean);
    }
    return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

DeviationStats summarize(std::vector<double> per_rep, std::span<const double> u_grid,
                         bool keep_per_rep) {
    DeviationStats stats;
    stats.reps = per_rep.size();
    const MeanSE m = mean_and_se(per_rep);
    stats.mean = m.mean;
    stats.std_error = m.se;
    std::vector<double> sorted = per_rep;
    std::sort(sorted.begin(), sorted.end());
    for (double u : u_grid) {
        stats.quantiles.push_back(tail_quantile(sorted, u));
    }
    if (keep_per_rep) {
        stats.per_rep = std::move(per_rep);
    }
    return stats;
}

DeviationStats mc_deviation(const samplers::PairSource& source, const MonteCarloOptions& options) {
    if (options.reps < 50) {
        throw InvalidArgument("mc_deviation needs reps >= 50");
    }
    std::vector<double> values(options.reps);
    parallel_for(options.reps, options.threads, [&](std::size_t r) {
        const samplers::SampleBatch batch = source.draw(options.N, options.seed, r);
        values[r] = deviation_norm(batch, source.cross_covariance(), options.method);
    });
    return summarize(std::move(values), options.u_grid, options.keep_per_rep);
}

DeviationParts decompose_deviation(const joint::JointGaussianModel& model,
                                   const samplers::SampleBatch& batch,
                                   matops::NormMethod method) {
    if (!batch.Z) {
        throw MissingResiduals("batch does not carry the regression residuals Z_i");
    }
    const double n = static_cast<double>(batch.N());
    Matrix sxx = batch.X.transpose() * batch.X;
    sxx /= n;
    sxx -= model.sigma_x.matrix().matrix();
    const Matrix a = sxx * model.L.transpose();
    Matrix b = batch.X.transpose() * *batch.Z;
    b /= n;
    const Matrix total = a + b;
    Matrix direct = sample_cross_cov(batch);
    direct -= model.sigma_xy;
    return DeviationParts{matops::operator_norm(a, method), matops::operator_norm(b, method),
                          matops::operator_norm(total, method),
                          (total - direct).cwiseAbs().maxCoeff()};
}

}  // namespace crosscov::estimators
