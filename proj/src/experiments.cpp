#include "crosscov/experiments.hpp"

#include "crosscov/errors.hpp"
#include "crosscov/parallel.hpp"
#include "crosscov/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <numbers>
#include <tuple>

namespace crosscov::experiments {

using matops::Matrix;
using samplers::FamilyKind;
using samplers::PairMode;

void SweepConfig::validate() const {
    if (N.empty() || marginals.empty() || couplings.empty() || samplers.empty()) {
        throw ConfigError("sweep grid axes must all be nonempty");
    }
    if (reps < 50) {
        throw ConfigError("reps must be >= 50");
    }
    for (Eigen::Index n : N) {
        if (n < 1) throw ConfigError("N values must be >= 1");
    }
    for (double u : u_grid) {
        if (!(u >= 1.0)) throw ConfigError("u-grid values must be >= 1");
    }
    for (const auto& s : samplers) {
        if (s.mode == PairMode::joint && s.family != FamilyKind::gaussian) {
            throw ConfigError("mode 'joint' is only defined for the gaussian family");
        }
        if (s.mode != PairMode::joint) {
            for (const auto& c : couplings) {
                if (c.mode != joint::CouplingSpec::Mode::independent) {
                    throw ConfigError("coupling '" + c.label() +
                                      "' needs mode 'joint'; sub-Gaussian modes take "
                                      "independent coupling only");
                }
            }
        }
    }
}

std::size_t SweepConfig::size() const {
    return N.size() * marginals.size() * couplings.size() * samplers.size();
}

std::vector<GridPoint> enumerate_grid(const SweepConfig& config) {
    std::vector<GridPoint> points;
    points.reserve(config.size());
    for (std::size_t m = 0; m < config.marginals.size(); ++m) {
        for (std::size_t c = 0; c < config.couplings.size(); ++c) {
            for (std::size_t s = 0; s < config.samplers.size(); ++s) {
                for (Eigen::Index n : config.N) {
                    points.push_back({points.size(), m, c, s, n});
                }
            }
        }
    }
    return points;
}

namespace {

struct SourceSlot {
    std::optional<samplers::PairSource> source;
    std::string error_code;
    std::string error_message;
};

SourceSlot build_source(const SweepConfig& config, std::size_t m, std::size_t c, std::size_t s) {
    SourceSlot slot;
    try {
        const MarginalPair& pair = config.marginals[m];
        spectra::CovarianceModel x = spectra::build_covariance(pair.x.spectrum, pair.x.rotation_seed);
        spectra::CovarianceModel y = spectra::build_covariance(pair.y.spectrum, pair.y.rotation_seed);
        const SamplerSpec& sampler = config.samplers[s];
        if (sampler.mode == PairMode::joint) {
            slot.source = samplers::PairSource::gaussian(joint::assemble(x, y, config.couplings[c]));
        } else {
            slot.source = samplers::PairSource::subgaussian(
                std::move(x), std::move(y), samplers::IsotropicFamily{sampler.family}, sampler.mode);
        }
    } catch (const Error& e) {
        slot.error_code = e.code();
        slot.error_message = e.what();
    }
    return slot;
}

}  // namespace

std::vector<SweepRecord> run_sweep(const SweepConfig& config, unsigned threads) {
    config.validate();
    const std::vector<GridPoint> points = enumerate_grid(config);
    std::map<std::tuple<std::size_t, std::size_t, std::size_t>, SourceSlot> sources;
    std::vector<SweepRecord> records;
    records.reserve(points.size());

    for (const GridPoint& p : points) {
        const auto key = std::make_tuple(p.marginal, p.coupling, p.sampler);
        auto it = sources.find(key);
        if (it == sources.end()) {
            it = sources.emplace(key, build_source(config, p.marginal, p.coupling, p.sampler)).first;
        }
        const SourceSlot& slot = it->second;
        const SamplerSpec& sampler = config.samplers[p.sampler];

        SweepRecord rec;
        rec.index = p.index;
        rec.marginal_label = config.marginals[p.marginal].label;
        rec.coupling_label = sampler.mode == PairMode::joint ? config.couplings[p.coupling].label()
                                                              : samplers::mode_name(sampler.mode);
        rec.family = samplers::IsotropicFamily{sampler.family}.name();
        rec.mode = samplers::mode_name(sampler.mode);
        rec.N = p.N;
        if (!slot.source) {
            rec.error_code = slot.error_code;
            rec.error_message = slot.error_message;
            records.push_back(std::move(rec));
            continue;
        }
        const samplers::PairSource& source = *slot.source;
        rec.r_x = source.sigma_x().eff_rank();
        rec.r_y = source.sigma_y().eff_rank();
        rec.opnorm_x = source.sigma_x().op_norm();
        rec.opnorm_y = source.sigma_y().op_norm();

        const auto start = std::chrono::steady_clock::now();
        try {
            estimators::MonteCarloOptions opts;
            opts.N = p.N;
            opts.reps = config.reps;
            opts.seed = config.seed;
            opts.u_grid = config.u_grid;
            opts.method = config.method;
            opts.threads = threads;
            rec.stats = estimators::mc_deviation(source, opts);

            const double K = source.family().K();
            bounds::BoundInputs in;
            in.k_x = K;
            in.k_y = K;
            in.opnorm_x = rec.opnorm_x;
            in.opnorm_y = rec.opnorm_y;
            in.r_x = rec.r_x;
            in.r_y = rec.r_y;
            in.N = static_cast<double>(p.N);
            in.d_x = static_cast<double>(source.sigma_x().dim());
            in.d_y = static_cast<double>(source.sigma_y().dim());
            rec.expectation_rate = bounds::expectation_rate(in);
            rec.two_sided_rate = bounds::gaussian_two_sided_rate(rec.opnorm_x, rec.opnorm_y,
                                                                 rec.r_x, rec.r_y, in.N);
            rec.ratio_expectation = rec.stats.mean / rec.expectation_rate;
            rec.ratio_two_sided = rec.stats.mean / rec.two_sided_rate;
            rec.ratio_two_sided_se = rec.stats.std_error / rec.two_sided_rate;
            for (const auto& q : rec.stats.quantiles) {
                in.u = q.u;
                const double rate = bounds::hp_upper_rate(in);
                rec.hp_rates.push_back(rate);
                rec.hp_ratios.push_back(q.value / rate);
            }
        } catch (const Error& e) {
            rec.error_code = e.code();
            rec.error_message = e.what();
        }
        rec.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        records.push_back(std::move(rec));
    }
    return records;
}

double ratio_spread(const std::vector<SweepRecord>& records) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (const auto& r : records) {
        if (r.failed()) continue;
        lo = std::min(lo, r.ratio_two_sided);
        hi = std::max(hi, r.ratio_two_sided);
    }
    if (!(hi > 0.0) || !std::isfinite(lo)) {
        throw InvalidArgument("ratio spread needs at least one successful record");
    }
    return hi / lo;
}

LineFit least_squares(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw InvalidArgument("least squares needs at least two (x, y) pairs");
    }
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) {
        throw InvalidArgument("least squares needs non-constant x");
    }
    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = y[i] - (intercept + slope * x[i]);
        ss_res += e * e;
    }
    const double r2 = syy == 0.0 ? 1.0 : 1.0 - ss_res / syy;
    return {slope, intercept, r2};
}

std::pair<double, Regime> dominance(double r_x, double r_y, double N) {
    const bounds::RateTerms t = bounds::rate_terms(r_x, r_y, N);
    if (t.sqrt_term >= t.product_term) {
        return {t.sqrt_term / t.product_term, Regime::sqrt_term};
    }
    return {t.product_term / t.sqrt_term, Regime::product_term};
}

ScalingFit fit_scaling(const std::vector<SweepRecord>& records, double regime_factor) {
    if (records.size() < 3) {
        throw InvalidArgument("fit_scaling needs at least 3 records");
    }
    std::vector<const SweepRecord*> sorted;
    for (const auto& r : records) {
        if (r.failed()) {
            throw InvalidArgument("fit_scaling got a failed record (index " +
                                  std::to_string(r.index) + ")");
        }
        const SweepRecord& first = records.front();
        if (r.marginal_label != first.marginal_label || r.coupling_label != first.coupling_label ||
            r.family != first.family || r.mode != first.mode) {
            throw InvalidArgument("fit_scaling records must differ only in N");
        }
        sorted.push_back(&r);
    }
    std::sort(sorted.begin(), sorted.end(),
              [](const SweepRecord* a, const SweepRecord* b) { return a->N < b->N; });
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (sorted[i]->N == sorted[i - 1]->N) {
            throw InvalidArgument("fit_scaling records must have distinct N");
        }
    }
    const SweepRecord& lo = *sorted.front();
    const SweepRecord& hi = *sorted.back();
    const auto [dom_lo, regime_lo] = dominance(lo.r_x, lo.r_y, static_cast<double>(lo.N));
    const auto [dom_hi, regime_hi] = dominance(hi.r_x, hi.r_y, static_cast<double>(hi.N));
    if (regime_lo != regime_hi || dom_lo < regime_factor || dom_hi < regime_factor) {
        throw RegimeAmbiguous("no rate term dominates by " + std::to_string(regime_factor) +
                              "x over N in [" + std::to_string(lo.N) + ", " +
                              std::to_string(hi.N) + "] (dominance " + std::to_string(dom_lo) +
                              " and " + std::to_string(dom_hi) + ")");
    }
    std::vector<double> lx, ly;
    for (const SweepRecord* r : sorted) {
        lx.push_back(std::log(static_cast<double>(r->N)));
        ly.push_back(std::log(r->stats.mean));
    }
    ScalingFit out;
    out.fit = least_squares(lx, ly);
    out.regime = regime_lo;
    out.expected_slope = regime_lo == Regime::sqrt_term ? -0.5 : -1.0;
    out.min_dominance = std::min(dom_lo, dom_hi);
    return out;
}

DependenceResult dependence_insensitivity(const spectra::CovarianceModel& sigma_x,
                                          const spectra::CovarianceModel& sigma_y,
                                          const std::vector<double>& rhos,
                                          const estimators::MonteCarloOptions& options) {
    if (rhos.empty()) {
        throw InvalidArgument("dependence_insensitivity needs at least one rho");
    }
    DependenceResult out;
    out.rhos = rhos;
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (double rho : rhos) {
        const auto source = samplers::PairSource::gaussian(
            joint::assemble(sigma_x, sigma_y, joint::CouplingSpec::aligned(rho)));
        out.stats.push_back(estimators::mc_deviation(source, options));
        lo = std::min(lo, out.stats.back().mean);
        hi = std::max(hi, out.stats.back().mean);
    }
    out.spread = hi / lo;
    return out;
}

namespace {

PairedGap paired_gap(std::span<const double> lhs, std::span<const double> rhs) {
    std::vector<double> diff(lhs.size());
    for (std::size_t i = 0; i < lhs.size(); ++i) {
        diff[i] = lhs[i] - rhs[i];
    }
    const estimators::MeanSE m = estimators::mean_and_se(diff);
    return {m.mean, m.se};
}

}  // namespace

LowerBoundRecord lower_bound_decomposition(const joint::JointGaussianModel& model,
                                           const estimators::MonteCarloOptions& options) {
    if (options.reps < 2) {
        throw InvalidArgument("lower_bound_decomposition needs reps >= 2");
    }
    LowerBoundRecord out;
    out.per_rep.resize(options.reps);
    parallel_for(options.reps, options.threads, [&](std::size_t r) {
        const samplers::SampleBatch batch =
            samplers::sample_joint_gaussian(model, options.N, options.seed, r);
        out.per_rep[r] = estimators::decompose_deviation(model, batch, options.method);
    });
    std::vector<double> a, b, total, half_sum;
    out.max_identity_residual = 0.0;
    for (const auto& p : out.per_rep) {
        a.push_back(p.norm_a);
        b.push_back(p.norm_b);
        total.push_back(p.norm_total);
        half_sum.push_back(0.5 * (p.norm_a + p.norm_b));
        out.max_identity_residual = std::max(out.max_identity_residual, p.identity_residual);
    }
    out.a = estimators::mean_and_se(a);
    out.b = estimators::mean_and_se(b);
    out.total = estimators::mean_and_se(total);
    out.total_minus_max = paired_gap(total, out.a.mean >= out.b.mean ? a : b);
    out.total_minus_half_sum = paired_gap(total, half_sum);
    return out;
}

CorrelationCheck correlation_inequality_check(const spectra::CovarianceModel& sigma_x,
                                              const Matrix& L, std::size_t reps,
                                              std::uint64_t seed) {
    if (L.cols() != sigma_x.dim()) {
        throw ShapeError("L must have d_X columns");
    }
    if (L.cwiseAbs().maxCoeff() == 0.0) {
        throw InvalidArgument("correlation_inequality_check needs a nonzero L");
    }
    if (reps < 2) {
        throw InvalidArgument("correlation_inequality_check needs reps >= 2");
    }
    const Matrix x = samplers::sample_vectors(sigma_x, samplers::IsotropicFamily{},
                                              static_cast<Eigen::Index>(reps), seed);
    const Matrix lx = x * L.transpose();
    const matops::Vector a = x.rowwise().norm();
    const matops::Vector b = lx.rowwise().norm();
    std::vector<double> va(a.data(), a.data() + a.size());
    std::vector<double> vb(b.data(), b.data() + b.size());
    std::vector<double> prod(reps);
    for (std::size_t i = 0; i < reps; ++i) prod[i] = va[i] * vb[i];

    CorrelationCheck out;
    out.norm_x = estimators::mean_and_se(va);
    out.norm_lx = estimators::mean_and_se(vb);
    out.lhs = estimators::mean_and_se(prod);
    out.rhs = out.norm_x.mean * out.norm_lx.mean;
    // Influence function of mean(ab) - mean(a) mean(b).
    std::vector<double> influence(reps);
    for (std::size_t i = 0; i < reps; ++i) {
        influence[i] = prod[i] - out.norm_x.mean * vb[i] - out.norm_lx.mean * va[i];
    }
    out.gap_se = estimators::mean_and_se(influence).se;
    out.norm_x_upper = std::sqrt(sigma_x.trace());
    out.norm_x_lower = std::sqrt(std::max(0.0, sigma_x.trace() - sigma_x.op_norm()));
    return out;
}

LineFit fit_tail(std::span<const double> quantiles, std::span<const double> predictors) {
    return least_squares(predictors, quantiles);
}

TailProfile tail_profile(const samplers::PairSource& source,
                         const estimators::MonteCarloOptions& options) {
    if (options.u_grid.size() < 2) {
        throw InvalidArgument("tail_profile needs at least two u levels");
    }
    for (double u : options.u_grid) {
        if (std::exp(-u) * static_cast<double>(options.reps) < 20.0) {
            throw InvalidArgument("u = " + std::to_string(u) +
                                  " fails the reliability rule e^{-u} reps >= 20");
        }
    }
    TailProfile out;
    out.stats = estimators::mc_deviation(source, options);
    std::vector<double> q;
    const double N = static_cast<double>(options.N);
    for (const auto& est : out.stats.quantiles) {
        q.push_back(est.value);
        out.predictors.push_back(
            bounds::hp_predictor(source.sigma_x().eff_rank(), source.sigma_y().eff_rank(), N, est.u));
    }
    out.fit = fit_tail(q, out.predictors);
    return out;
}

double finite_set_sup(const Matrix& Z, const Matrix& W, const Matrix& expected_cross,
                      const Matrix& T, const Matrix& S) {
    if (T.rows() * S.rows() > 1'000'000) {
        throw InvalidArgument("|T| |S| exceeds the brute-force limit of 1e6 pairs");
    }
    if (T.cols() != Z.cols() || S.cols() != W.cols() || Z.rows() != W.rows()) {
        throw ShapeError("index sets do not match the sample dimensions");
    }
    Matrix m = Z.transpose() * W;
    m /= static_cast<double>(Z.rows());
    m -= expected_cross;
    const Matrix values = T * m * S.transpose();
    return values.cwiseAbs().maxCoeff();
}

FiniteSetRecord finite_set_verification(const bounds::IndexSetSummary& T,
                                        const bounds::IndexSetSummary& S,
                                        samplers::IsotropicFamily family, samplers::PairMode mode,
                                        const estimators::MonteCarloOptions& options) {
    if (options.reps < 50) {
        throw InvalidArgument("finite_set_verification needs reps >= 50");
    }
    const auto dz = static_cast<int>(T.points.cols());
    const auto dw = static_cast<int>(S.points.cols());
    const spectra::CovarianceModel iz = spectra::build_covariance(spectra::SpectrumSpec::flat(dz));
    const spectra::CovarianceModel iw = spectra::build_covariance(spectra::SpectrumSpec::flat(dw));
    const Matrix expected = samplers::subgaussian_cross_covariance(iz, iw, mode);

    FiniteSetRecord out;
    out.family = family.name();
    out.N = options.N;
    out.per_rep_sup.resize(options.reps);
    parallel_for(options.reps, options.threads, [&](std::size_t r) {
        const samplers::SampleBatch batch =
            samplers::sample_subgaussian_pair(iz, iw, family, mode, options.N, options.seed, r);
        out.per_rep_sup[r] = finite_set_sup(batch.X, batch.Y, expected, T.points, S.points);
    });
    out.stats = estimators::summarize(out.per_rep_sup, options.u_grid, false);
    const double K = family.K();
    for (const auto& q : out.stats.quantiles) {
        const double rate = bounds::thm2_rate(T, S, K, K, static_cast<double>(options.N), q.u);
        out.rows.push_back({q.u, q, rate, rate > 0.0 ? q.value / rate : 0.0});
    }
    return out;
}

Matrix fibonacci_sphere(int count) {
    if (count < 1) {
        throw InvalidArgument("sphere net needs at least one point");
    }
    const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
    Matrix pts(count, 3);
    for (int i = 0; i < count; ++i) {
        const double y = 1.0 - 2.0 * (i + 0.5) / count;
        const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
        const double phi = golden_angle * i;
        pts(i, 0) = r * std::cos(phi);
        pts(i, 1) = y;
        pts(i, 2) = r * std::sin(phi);
    }
    return pts;
}

RecoveryCheck covariance_recovery(const spectra::CovarianceModel& sigma,
                                  samplers::IsotropicFamily family,
                                  const estimators::MonteCarloOptions& options) {
    RecoveryCheck out;
    out.cross_path.resize(options.reps);
    out.covariance_path.resize(options.reps);
    const auto source =
        samplers::PairSource::subgaussian(sigma, sigma, family, PairMode::shared_source);
    parallel_for(options.reps, options.threads, [&](std::size_t r) {
        const samplers::SampleBatch batch = source.draw(options.N, options.seed, r);
        out.cross_path[r] =
            estimators::deviation_norm(batch, source.cross_covariance(), options.method);
        const Matrix x = samplers::sample_vectors(sigma, family, options.N, options.seed, r);
        out.covariance_path[r] =
            estimators::covariance_deviation_norm(x, sigma.matrix(), options.method);
    });
    out.bit_identical = true;
    for (std::size_t r = 0; r < options.reps; ++r) {
        if (std::memcmp(&out.cross_path[r], &out.covariance_path[r], sizeof(double)) != 0) {
            out.bit_identical = false;
        }
    }
    return out;
}

IsserlisCheck isserlis_check(const joint::JointGaussianModel& model, const matops::Vector& v,
                             const matops::Vector& h, std::size_t reps, std::uint64_t seed) {
    IsserlisCheck out;
    out.var_x = v.dot(model.sigma_x.matrix().matrix() * v);
    out.var_y = h.dot(model.sigma_y.matrix().matrix() * h);
    out.cov_xy = v.dot(model.sigma_xy * h);
    out.closed_form = bounds::isserlis_variance(model.sigma_x.matrix().matrix(),
                                                model.sigma_y.matrix().matrix(), model.sigma_xy,
                                                v, h);
    const double base = out.var_x * out.var_y;
    out.lower_ok = base <= out.closed_form;
    out.upper_ok = out.closed_form <= 2.0 * base + 1e-12;

    const samplers::SampleBatch batch =
        samplers::sample_joint_gaussian(model, static_cast<Eigen::Index>(reps), seed);
    const matops::Vector prod = (batch.X * v).cwiseProduct(batch.Y * h);
    const double n = static_cast<double>(reps);
    const double mean = prod.mean();
    double m2 = 0.0, m4 = 0.0;
    for (Eigen::Index i = 0; i < prod.size(); ++i) {
        const double c = prod(i) - mean;
        m2 += c * c;
        m4 += c * c * c * c;
    }
    out.mc_variance = m2 / (n - 1.0);
    m4 /= n;
    const double s2 = m2 / n;
    out.mc_se = std::sqrt(std::max(0.0, m4 - s2 * s2) / n);
    return out;
}

IsserlisTriple random_isserlis_triple(int dim, std::uint64_t seed) {
    random::Stream stream(seed, 0, random::Role::oracle);
    auto random_spectrum = [&] {
        std::vector<double> values(static_cast<std::size_t>(dim));
        for (double& x : values) x = 0.1 + 2.0 * stream.uniform();
        return spectra::SpectrumSpec::custom(std::move(values));
    };
    const auto sx = spectra::build_covariance(random_spectrum(), stream.bits());
    const auto sy = spectra::build_covariance(random_spectrum(), stream.bits());
    Matrix c(dim, dim);
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
        for (Eigen::Index i = 0; i < c.rows(); ++i) c(i, j) = stream.normal();
    }
    const double target = 0.95 * stream.uniform();
    c *= target / matops::operator_norm(c, matops::NormMethod::exact);
    matops::Vector v(dim), h(dim);
    for (int i = 0; i < dim; ++i) v(i) = stream.normal();
    for (int i = 0; i < dim; ++i) h(i) = stream.normal();
    v /= v.norm();
    h /= h.norm();
    return {joint::assemble(sx, sy, joint::CouplingSpec::custom_matrix(c)), v, h};
}

joint::JointGaussianModel scalar_model(double var_x, double var_y, double cov_xy) {
    if (!(var_x > 0.0) || !(var_y > 0.0)) {
        throw InvalidArgument("scalar model needs positive variances");
    }
    const auto sx = spectra::build_covariance(spectra::SpectrumSpec::custom({var_x}));
    const auto sy = spectra::build_covariance(spectra::SpectrumSpec::custom({var_y}));
    const double rho = cov_xy / std::sqrt(var_x * var_y);
    if (rho == 0.0) {
        return joint::assemble(sx, sy, joint::CouplingSpec::independent());
    }
    return joint::assemble(sx, sy, joint::CouplingSpec::custom_matrix(Matrix::Constant(1, 1, rho)));
}

}  // namespace crosscov::experiments
