#include "crosscov/cli.hpp"

#include "crosscov/bounds.hpp"
#include "crosscov/errors.hpp"
#include "crosscov/estimators.hpp"
#include "crosscov/experiments.hpp"
#include "crosscov/parallel.hpp"
#include "crosscov/random.hpp"
#include "crosscov/version.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>

namespace crosscov::cli {

using config::Json;
using config::Reader;

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

bool CommandResult::ok() const {
    if (failed_cells) return false;
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"spectrum", "verify-upper", "verify-lower",
                                                "sweep",    "isserlis",     "finite-sets"};
    return names;
}

namespace {

class Table {
public:
    explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}

    Table& put(const std::string& s) {
        row_.push_back(csv_field(s));
        return *this;
    }
    Table& put(const char* s) { return put(std::string(s)); }
    Table& put(double v) {
        row_.push_back(format_double(v));
        return *this;
    }
    Table& put(Eigen::Index v) {
        row_.push_back(std::to_string(v));
        return *this;
    }
    Table& put(std::size_t v) {
        row_.push_back(std::to_string(v));
        return *this;
    }
    Table& put(bool b) {
        row_.push_back(b ? "true" : "false");
        return *this;
    }
    Table& put(const std::optional<double>& v) {
        row_.push_back(v ? format_double(*v) : "");
        return *this;
    }
    Table& blank() {
        row_.emplace_back();
        return *this;
    }
    void end_row() {
        if (row_.size() != header_.size()) {
            throw std::logic_error("CSV row width does not match its header");
        }
        rows_.push_back(std::move(row_));
        row_.clear();
    }

    std::string str() const {
        std::string out;
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                if (i) out += ',';
                out += cells[i];
            }
            out += '\n';
        };
        std::vector<std::string> head;
        for (const auto& h : header_) head.push_back(csv_field(h));
        line(head);
        for (const auto& r : rows_) line(r);
        return out;
    }

private:
    std::vector<std::string> header_;
    std::vector<std::string> row_;
    std::vector<std::vector<std::string>> rows_;
};

struct Common {
    std::uint64_t seed = 0;
    std::size_t reps = 0;
    unsigned threads = 1;
};

Common read_common(Reader& top, const Overrides& ov, std::size_t default_reps,
                   std::size_t min_reps) {
    Common c;
    top.get<int>("version");
    if (top.has("description")) top.get<std::string>("description");
    c.seed = top.get_or<std::uint64_t>("seed", 0);
    if (ov.seed) {
        c.seed = *ov.seed;
        top.set("seed", c.seed);
    }
    c.reps = top.get_or<std::size_t>("reps", default_reps);
    if (ov.reps) {
        c.reps = *ov.reps;
        top.set("reps", c.reps);
    }
    if (c.reps < min_reps) {
        throw ConfigError("reps must be >= " + std::to_string(min_reps));
    }
    c.threads = std::max(1u, ov.threads);
    return c;
}

void check_command_key(Reader& top, const std::string& command) {
    if (top.has("command")) {
        const auto named = top.get<std::string>("command");
        if (named != command) {
            throw ConfigError("config is for command '" + named + "', not '" + command + "'");
        }
    }
}

Check make_check(std::string name, double value, double threshold, bool passed) {
    return {std::move(name), value, threshold, passed};
}

Json checks_json(const std::vector<Check>& checks) {
    Json arr = Json::array();
    for (const auto& c : checks) {
        arr.push_back({{"name", c.name},
                       {"value", c.value},
                       {"threshold", c.threshold},
                       {"passed", c.passed}});
    }
    return arr;
}

experiments::MarginalSpec read_marginal(Reader& parent, const std::string& key) {
    Reader r = parent.child(key);
    auto m = config::parse_marginal(r);
    parent.adopt(key, r);
    return m;
}

spectra::CovarianceModel build(const experiments::MarginalSpec& m) {
    return spectra::build_covariance(m.spectrum, m.rotation_seed);
}

std::vector<double> read_u_grid(Reader& top, std::vector<double> fallback) {
    std::vector<double> u = fallback;
    if (top.has("u_grid")) {
        u = config::parse_double_list(top.raw("u_grid"), "u_grid");
    } else {
        top.set("u_grid", fallback);
    }
    for (double x : u) {
        if (!(x >= 1.0)) throw ConfigError("u_grid values must be >= 1");
    }
    return u;
}

matops::NormMethod read_norm(Reader& top) {
    return config::parse_norm_method(top.get_or<std::string>("norm_method", "auto"));
}

std::vector<joint::CouplingSpec> read_couplings(Reader& top, const std::string& key) {
    std::vector<joint::CouplingSpec> out;
    if (!top.has(key)) {
        top.set(key, Json::array({"independent"}));
        out.push_back(joint::CouplingSpec::independent());
        return out;
    }
    const Json& arr = top.raw(key);
    if (!arr.is_array() || arr.empty()) {
        throw ConfigError(key + " must be a nonempty array");
    }
    Json resolved = Json::array();
    for (std::size_t i = 0; i < arr.size(); ++i) {
        Json r;
        out.push_back(config::parse_coupling(arr[i], key + "[" + std::to_string(i) + "]", r));
        resolved.push_back(r);
    }
    top.set(key, resolved);
    return out;
}

// Optional acceptance block; returns a reader over an empty object if absent.
struct Acceptance {
    Json empty = Json::object();
    std::optional<Reader> reader;

    explicit Acceptance(Reader& top) {
        if (top.has("acceptance")) {
            reader.emplace(top.child("acceptance"));
        } else {
            reader.emplace(empty, "acceptance");
        }
    }
    std::optional<double> number(const std::string& key) {
        if (!reader->has(key)) return std::nullopt;
        return reader->get<double>(key);
    }
    void finish(Reader& top) {
        reader->finish();
        if (top.has("acceptance")) top.adopt("acceptance", *reader);
    }
};

bounds::BoundInputs bound_inputs(const samplers::PairSource& source, Eigen::Index N) {
    bounds::BoundInputs in;
    in.k_x = in.k_y = source.family().K();
    in.opnorm_x = source.sigma_x().op_norm();
    in.opnorm_y = source.sigma_y().op_norm();
    in.r_x = source.sigma_x().eff_rank();
    in.r_y = source.sigma_y().eff_rank();
    in.N = static_cast<double>(N);
    in.d_x = static_cast<double>(source.sigma_x().dim());
    in.d_y = static_cast<double>(source.sigma_y().dim());
    return in;
}

samplers::PairSource make_source(const spectra::CovarianceModel& x,
                                 const spectra::CovarianceModel& y,
                                 const joint::CouplingSpec& coupling,
                                 const experiments::SamplerSpec& sampler) {
    if (sampler.mode == samplers::PairMode::joint) {
        if (sampler.family != samplers::FamilyKind::gaussian) {
            throw ConfigError("mode 'joint' is only defined for the gaussian family");
        }
        return samplers::PairSource::gaussian(joint::assemble(x, y, coupling));
    }
    if (coupling.mode != joint::CouplingSpec::Mode::independent) {
        throw ConfigError("sub-Gaussian modes take independent coupling only");
    }
    return samplers::PairSource::subgaussian(x, y, samplers::IsotropicFamily{sampler.family},
                                             sampler.mode);
}

Eigen::Index read_single_N(Reader& top) {
    const auto n = top.get<Eigen::Index>("N");
    if (n < 1) throw ConfigError("N must be >= 1");
    return n;
}

// ---------------------------------------------------------------- spectrum

CommandResult cmd_spectrum(Reader& top, const Overrides& ov) {
    read_common(top, ov, 0, 0);
    check_command_key(top, "spectrum");
    const Json& arr = top.raw("spectra");
    if (!arr.is_array() || arr.empty()) {
        throw ConfigError("spectra must be a nonempty array");
    }
    Table table({"label", "d", "trace", "opnorm", "eff_rank"});
    Json rows = Json::array();
    Json resolved = Json::array();
    for (std::size_t i = 0; i < arr.size(); ++i) {
        Reader r(arr[i], "spectra[" + std::to_string(i) + "]");
        const bool has_label = r.has("label");
        std::string label = has_label ? r.get<std::string>("label") : "";
        const auto m = config::parse_marginal(r);
        if (!has_label) label = config::marginal_label(m);
        const auto cov = build(m);
        table.put(label).put(cov.dim()).put(cov.trace()).put(cov.op_norm()).put(cov.eff_rank());
        table.end_row();
        rows.push_back({{"label", label},
                        {"d", cov.dim()},
                        {"trace", cov.trace()},
                        {"opnorm", cov.op_norm()},
                        {"eff_rank", cov.eff_rank()}});
        resolved.push_back(r.resolved());
    }
    top.set("spectra", resolved);
    top.finish();

    CommandResult res;
    res.csv = table.str();
    res.summary["results"] = rows;
    return res;
}

// ------------------------------------------------------------ verify-upper

CommandResult cmd_verify_upper(Reader& top, const Overrides& ov) {
    const Common c = read_common(top, ov, 1000, 50);
    check_command_key(top, "verify-upper");
    const Eigen::Index N = read_single_N(top);
    const auto u_grid = read_u_grid(top, {1.0, 2.0, 3.0, 4.0});
    const auto method = read_norm(top);
    const auto mx = read_marginal(top, "x");
    const auto my = top.has("y") ? read_marginal(top, "y") : mx;
    joint::CouplingSpec coupling = joint::CouplingSpec::independent();
    if (top.has("coupling")) {
        Json r;
        coupling = config::parse_coupling(top.raw("coupling"), "coupling", r);
        top.set("coupling", r);
    }
    experiments::SamplerSpec sampler;
    if (top.has("sampler")) {
        Reader r = top.child("sampler");
        sampler = config::parse_sampler(r);
        top.adopt("sampler", r);
    }
    const bool per_rep = top.get_or("per_rep", false);
    Acceptance acc(top);
    const auto min_r2 = acc.number("min_r_squared");
    acc.finish(top);
    top.finish();

    const auto x = build(mx);
    const auto y = build(my);
    const auto source = make_source(x, y, coupling, sampler);

    estimators::MonteCarloOptions opts;
    opts.N = N;
    opts.reps = c.reps;
    opts.seed = c.seed;
    opts.u_grid = u_grid;
    opts.method = method;
    opts.threads = c.threads;
    opts.keep_per_rep = per_rep;
    const auto stats = estimators::mc_deviation(source, opts);

    bounds::BoundInputs in = bound_inputs(source, N);
    Table table({"u", "level", "quantile", "reliable", "predictor", "hp_rate", "ratio"});
    Json rows = Json::array();
    std::vector<double> fit_q, fit_p;
    for (const auto& q : stats.quantiles) {
        in.u = q.u;
        const double rate = bounds::hp_upper_rate(in);
        const double pred = bounds::hp_predictor(in.r_x, in.r_y, in.N, q.u);
        table.put(q.u).put(q.level).put(q.value).put(q.reliable).put(pred).put(rate).put(
            q.value / rate);
        table.end_row();
        rows.push_back({{"u", q.u},
                        {"level", q.level},
                        {"quantile", q.value},
                        {"reliable", q.reliable},
                        {"predictor", pred},
                        {"hp_rate", rate},
                        {"ratio", q.value / rate}});
        if (q.reliable) {
            fit_q.push_back(q.value);
            fit_p.push_back(pred);
        }
    }

    CommandResult res;
    res.csv = table.str();
    Json results;
    results["model"] = source.label();
    results["N"] = N;
    results["r_x"] = in.r_x;
    results["r_y"] = in.r_y;
    results["mean"] = stats.mean;
    results["std_error"] = stats.std_error;
    results["expectation_rate"] = bounds::expectation_rate(in);
    results["two_sided_rate"] =
        bounds::gaussian_two_sided_rate(in.opnorm_x, in.opnorm_y, in.r_x, in.r_y, in.N);
    results["rows"] = rows;
    if (fit_q.size() >= 2) {
        const auto fit = experiments::fit_tail(fit_q, fit_p);
        results["fit"] = {{"slope", fit.slope},
                          {"intercept", fit.intercept},
                          {"r_squared", fit.r_squared},
                          {"points", fit_q.size()}};
        if (min_r2) {
            res.checks.push_back(make_check("tail_fit_r_squared", fit.r_squared, *min_r2,
                                            fit.r_squared >= *min_r2));
            res.checks.push_back(make_check("tail_fit_slope_positive", fit.slope, 0.0,
                                            fit.slope > 0.0));
        }
    } else if (min_r2) {
        res.checks.push_back(make_check("tail_fit_r_squared",
                                        std::numeric_limits<double>::quiet_NaN(), *min_r2, false));
    }
    if (per_rep) results["per_rep"] = stats.per_rep;
    res.summary["results"] = results;
    return res;
}

// ------------------------------------------------------------ verify-lower

CommandResult cmd_verify_lower(Reader& top, const Overrides& ov) {
    const Common c = read_common(top, ov, 500, 2);
    check_command_key(top, "verify-lower");
    const Eigen::Index N = read_single_N(top);
    const auto method = read_norm(top);
    const auto mx = read_marginal(top, "x");
    const auto my = top.has("y") ? read_marginal(top, "y") : mx;
    const auto couplings = read_couplings(top, "couplings");
    Acceptance acc(top);
    const double slack = acc.number("se_slack").value_or(3.0);
    const bool check_max = acc.reader->get_or("check_max", true);
    const bool check_half = acc.reader->get_or("check_half_sum", true);
    acc.finish(top);
    top.finish();

    const auto x = build(mx);
    const auto y = build(my);
    Table table({"coupling", "N", "r_x", "r_y", "r_p", "r_q", "mean_a", "se_a", "mean_b", "se_b",
                 "mean_total", "se_total", "gap_max", "gap_max_se", "gap_half_sum",
                 "gap_half_sum_se", "two_sided_rate", "ratio_total", "lemma_rate",
                 "max_identity_residual"});
    Json rows = Json::array();
    CommandResult res;
    for (const auto& coupling : couplings) {
        const auto model = joint::assemble(x, y, coupling);
        estimators::MonteCarloOptions opts;
        opts.N = N;
        opts.reps = c.reps;
        opts.seed = c.seed;
        opts.method = method;
        opts.threads = c.threads;
        const auto rec = experiments::lower_bound_decomposition(model, opts);
        const double rate = bounds::gaussian_two_sided_rate(
            x.op_norm(), y.op_norm(), model.r_x, model.r_y, static_cast<double>(N));
        std::optional<double> lemma;
        if (model.r_p) {
            const double op_p = matops::operator_norm(model.P.matrix(), matops::NormMethod::exact);
            lemma = bounds::lower_bound_rate_lemma(x.op_norm(), model.r_x, op_p, *model.r_p,
                                                   static_cast<double>(N));
        }
        const std::string label = model.coupling_label;
        table.put(label).put(N).put(model.r_x).put(model.r_y).put(model.r_p).put(model.r_q);
        table.put(rec.a.mean).put(rec.a.se).put(rec.b.mean).put(rec.b.se);
        table.put(rec.total.mean).put(rec.total.se);
        table.put(rec.total_minus_max.gap).put(rec.total_minus_max.se);
        table.put(rec.total_minus_half_sum.gap).put(rec.total_minus_half_sum.se);
        table.put(rate).put(rec.total.mean / rate).put(lemma).put(rec.max_identity_residual);
        table.end_row();

        Json row = {{"coupling", label},
                    {"mean_a", rec.a.mean},
                    {"se_a", rec.a.se},
                    {"mean_b", rec.b.mean},
                    {"se_b", rec.b.se},
                    {"mean_total", rec.total.mean},
                    {"se_total", rec.total.se},
                    {"gap_max", rec.total_minus_max.gap},
                    {"gap_max_se", rec.total_minus_max.se},
                    {"gap_half_sum", rec.total_minus_half_sum.gap},
                    {"gap_half_sum_se", rec.total_minus_half_sum.se},
                    {"two_sided_rate", rate},
                    {"max_identity_residual", rec.max_identity_residual}};
        if (lemma) row["lemma_rate"] = *lemma;
        rows.push_back(row);

        if (check_max) {
            const double floor = 0.0 - slack * rec.total_minus_max.se;
            res.checks.push_back(make_check(label + ":total_vs_max", rec.total_minus_max.gap,
                                            floor, rec.total_minus_max.gap >= floor));
        }
        if (check_half) {
            const double floor = 0.0 - slack * rec.total_minus_half_sum.se;
            res.checks.push_back(make_check(label + ":total_vs_half_sum",
                                            rec.total_minus_half_sum.gap, floor,
                                            rec.total_minus_half_sum.gap >= floor));
        }
    }
    res.csv = table.str();
    res.summary["results"] = {{"N", N}, {"rows", rows}};
    return res;
}

// ------------------------------------------------------------------- sweep

std::vector<experiments::MarginalPair> read_marginal_pairs(Reader& top) {
    const Json& arr = top.raw("marginals");
    if (!arr.is_array() || arr.empty()) {
        throw ConfigError("marginals must be a nonempty array");
    }
    std::vector<experiments::MarginalPair> out;
    Json resolved = Json::array();
    for (std::size_t i = 0; i < arr.size(); ++i) {
        Reader r(arr[i], "marginals[" + std::to_string(i) + "]");
        experiments::MarginalPair pair;
        const bool has_label = r.has("label");
        if (has_label) pair.label = r.get<std::string>("label");
        pair.x = read_marginal(r, "x");
        pair.y = r.has("y") ? read_marginal(r, "y") : pair.x;
        if (!has_label) {
            pair.label = config::marginal_label(pair.x);
            if (r.has("y")) pair.label += "|" + config::marginal_label(pair.y);
        }
        r.finish();
        out.push_back(std::move(pair));
        resolved.push_back(r.resolved());
    }
    top.set("marginals", resolved);
    return out;
}

std::vector<experiments::SamplerSpec> read_samplers(Reader& top) {
    std::vector<experiments::SamplerSpec> out;
    if (!top.has("samplers")) {
        top.set("samplers", Json::array({{{"family", "gaussian"}, {"mode", "joint"}}}));
        out.push_back({});
        return out;
    }
    const Json& arr = top.raw("samplers");
    if (!arr.is_array() || arr.empty()) {
        throw ConfigError("samplers must be a nonempty array");
    }
    Json resolved = Json::array();
    for (std::size_t i = 0; i < arr.size(); ++i) {
        Reader r(arr[i], "samplers[" + std::to_string(i) + "]");
        out.push_back(config::parse_sampler(r));
        resolved.push_back(r.resolved());
    }
    top.set("samplers", resolved);
    return out;
}

const char* regime_name(experiments::Regime r) {
    return r == experiments::Regime::sqrt_term ? "sqrt_term" : "product_term";
}

CommandResult cmd_sweep(Reader& top, const Overrides& ov) {
    const Common c = read_common(top, ov, 200, 50);
    check_command_key(top, "sweep");
    experiments::SweepConfig cfg;
    cfg.N = config::parse_size_list(top.raw("N"), "N");
    cfg.u_grid = read_u_grid(top, {1.0, 2.0, 3.0});
    cfg.method = read_norm(top);
    cfg.marginals = read_marginal_pairs(top);
    cfg.couplings = read_couplings(top, "couplings");
    cfg.samplers = read_samplers(top);
    cfg.reps = c.reps;
    cfg.seed = c.seed;
    Acceptance acc(top);
    const auto max_spread = acc.number("max_ratio_spread");
    const auto slope_min = acc.number("slope_min");
    const auto slope_max = acc.number("slope_max");
    const auto min_r2 = acc.number("min_r_squared");
    const auto max_dep = acc.number("max_dependence_spread");
    const auto max_sub = acc.number("max_subgaussian_excess");
    const double regime_factor = acc.number("regime_factor").value_or(4.0);
    acc.finish(top);
    top.finish();
    try {
        cfg.validate();
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }

    const auto records = experiments::run_sweep(cfg, c.threads);

    std::vector<std::string> header{"index", "marginal", "coupling", "family", "mode", "N",
                                    "r_x", "r_y", "opnorm_x", "opnorm_y", "reps", "mean",
                                    "std_error", "expectation_rate", "two_sided_rate",
                                    "ratio_expectation", "ratio_two_sided",
                                    "ratio_two_sided_se"};
    for (double u : cfg.u_grid) {
        const std::string s = format_double(u);
        for (const char* col : {"quantile_u", "reliable_u", "hp_rate_u", "hp_ratio_u"}) {
            header.push_back(col + s);
        }
    }
    header.push_back("error_code");
    header.push_back("error_message");
    Table table(header);

    CommandResult res;
    Json failed = Json::array();
    for (const auto& r : records) {
        table.put(r.index).put(r.marginal_label).put(r.coupling_label).put(r.family).put(r.mode);
        table.put(r.N);
        if (r.failed()) {
            res.failed_cells = true;
            failed.push_back({{"index", r.index}, {"code", r.error_code}, {"message", r.error_message}});
            for (std::size_t i = 6; i + 2 < header.size(); ++i) table.blank();
            table.put(r.error_code).put(r.error_message);
            table.end_row();
            continue;
        }
        table.put(r.r_x).put(r.r_y).put(r.opnorm_x).put(r.opnorm_y).put(r.stats.reps);
        table.put(r.stats.mean).put(r.stats.std_error).put(r.expectation_rate).put(
            r.two_sided_rate);
        table.put(r.ratio_expectation).put(r.ratio_two_sided).put(r.ratio_two_sided_se);
        for (std::size_t k = 0; k < cfg.u_grid.size(); ++k) {
            const auto& q = r.stats.quantiles[k];
            table.put(q.value).put(q.reliable).put(r.hp_rates[k]).put(r.hp_ratios[k]);
        }
        table.blank().blank();
        table.end_row();
    }
    res.csv = table.str();

    Json results;
    results["cells"] = records.size();
    results["failed_cells"] = failed;
    double total_wall = 0.0;
    for (const auto& r : records) total_wall += r.wall_seconds;
    results["cell_wall_seconds"] = total_wall;

    bool any_ok = std::any_of(records.begin(), records.end(),
                              [](const auto& r) { return !r.failed(); });
    if (any_ok) {
        const double spread = experiments::ratio_spread(records);
        results["ratio_spread"] = spread;
        if (max_spread) {
            res.checks.push_back(
                make_check("ratio_spread", spread, *max_spread, spread <= *max_spread));
        }
    } else if (max_spread) {
        res.checks.push_back(make_check("ratio_spread", std::numeric_limits<double>::quiet_NaN(),
                                        *max_spread, false));
    }

    // Scaling fits over each block of records that differ only in N.
    const std::size_t nN = cfg.N.size();
    Json fits = Json::array();
    if (nN >= 3) {
        for (std::size_t start = 0; start < records.size(); start += nN) {
            std::vector<experiments::SweepRecord> block(records.begin() + start,
                                                        records.begin() + start + nN);
            Json f = {{"marginal", block[0].marginal_label},
                      {"coupling", block[0].coupling_label},
                      {"family", block[0].family},
                      {"mode", block[0].mode}};
            const std::string name = "fit[" + std::to_string(start / nN) + "]";
            if (std::any_of(block.begin(), block.end(), [](const auto& r) { return r.failed(); })) {
                f["error"] = "block contains failed cells";
                fits.push_back(f);
                continue;
            }
            std::vector<double> lx, ly;
            for (const auto& r : block) {
                lx.push_back(std::log(static_cast<double>(r.N)));
                ly.push_back(std::log(r.stats.mean));
            }
            const auto raw = experiments::least_squares(lx, ly);
            f["raw_slope"] = raw.slope;
            f["raw_r_squared"] = raw.r_squared;
            try {
                const auto fit = experiments::fit_scaling(block, regime_factor);
                f["slope"] = fit.fit.slope;
                f["intercept"] = fit.fit.intercept;
                f["r_squared"] = fit.fit.r_squared;
                f["regime"] = regime_name(fit.regime);
                f["expected_slope"] = fit.expected_slope;
                f["min_dominance"] = fit.min_dominance;
                if (slope_min) {
                    res.checks.push_back(make_check(name + ":slope_min", fit.fit.slope, *slope_min,
                                                    fit.fit.slope >= *slope_min));
                }
                if (slope_max) {
                    res.checks.push_back(make_check(name + ":slope_max", fit.fit.slope, *slope_max,
                                                    fit.fit.slope <= *slope_max));
                }
                if (min_r2) {
                    res.checks.push_back(make_check(name + ":r_squared", fit.fit.r_squared,
                                                    *min_r2, fit.fit.r_squared >= *min_r2));
                }
            } catch (const RegimeAmbiguous& e) {
                f["error"] = e.what();
                if (slope_min || slope_max || min_r2) {
                    res.checks.push_back(make_check(name + ":regime", raw.slope, regime_factor,
                                                    false));
                }
            }
            fits.push_back(f);
        }
    }
    results["fits"] = fits;

    // Spread of means across couplings at fixed marginal, sampler and N.
    if (cfg.couplings.size() >= 2) {
        double worst = 1.0;
        const std::size_t nC = cfg.couplings.size();
        const std::size_t nS = cfg.samplers.size();
        for (std::size_t m = 0; m < cfg.marginals.size(); ++m) {
            for (std::size_t s = 0; s < nS; ++s) {
                for (std::size_t n = 0; n < nN; ++n) {
                    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
                    for (std::size_t cc = 0; cc < nC; ++cc) {
                        const auto& r = records[((m * nC + cc) * nS + s) * nN + n];
                        if (r.failed()) continue;
                        lo = std::min(lo, r.stats.mean);
                        hi = std::max(hi, r.stats.mean);
                    }
                    if (hi > 0.0 && std::isfinite(lo)) worst = std::max(worst, hi / lo);
                }
            }
        }
        results["dependence_spread"] = worst;
        if (max_dep) {
            res.checks.push_back(
                make_check("dependence_spread", worst, *max_dep, worst <= *max_dep));
        }
    }

    // Sub-Gaussian ratios against the largest Gaussian ratio at the same
    // marginal and N.
    std::map<std::pair<std::string, Eigen::Index>, double> gauss_max;
    for (const auto& r : records) {
        if (r.failed() || r.family != "gaussian") continue;
        auto& slot = gauss_max[{r.marginal_label, r.N}];
        slot = std::max(slot, r.ratio_expectation);
    }
    double excess = 0.0;
    bool matched = false;
    for (const auto& r : records) {
        if (r.failed() || r.family == "gaussian") continue;
        auto it = gauss_max.find({r.marginal_label, r.N});
        if (it == gauss_max.end()) continue;
        matched = true;
        excess = std::max(excess, r.ratio_expectation / it->second);
    }
    if (matched) {
        results["subgaussian_excess"] = excess;
        if (max_sub) {
            res.checks.push_back(
                make_check("subgaussian_excess", excess, *max_sub, excess <= *max_sub));
        }
    }
    res.summary["results"] = results;
    return res;
}

// ---------------------------------------------------------------- isserlis

CommandResult cmd_isserlis(Reader& top, const Overrides& ov) {
    const Common c = read_common(top, ov, 100000, 100);
    check_command_key(top, "isserlis");
    struct Case {
        std::string kind;
        int dim;
        joint::JointGaussianModel model;
        matops::Vector v, h;
    };
    std::vector<Case> cases;
    if (top.has("cases")) {
        const Json& arr = top.raw("cases");
        if (!arr.is_array()) throw ConfigError("cases must be an array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            Reader r(arr[i], "cases[" + std::to_string(i) + "]");
            const double a = r.get<double>("var_x");
            const double b = r.get<double>("var_y");
            const double cxy = r.get<double>("cov_xy");
            r.finish();
            if (!(a > 0.0) || !(b > 0.0) || !(cxy * cxy < a * b)) {
                throw ConfigError(r.path() + " needs var_x, var_y > 0 and cov_xy^2 < var_x var_y");
            }
            cases.push_back({"scalar", 1, experiments::scalar_model(a, b, cxy),
                             matops::Vector::Ones(1), matops::Vector::Ones(1)});
        }
    }
    if (top.has("random_cases")) {
        Reader r = top.child("random_cases");
        const int count = r.get<int>("count");
        const int dim = r.get<int>("dim");
        r.finish();
        top.adopt("random_cases", r);
        if (count < 0 || dim < 1) throw ConfigError("random_cases needs count >= 0, dim >= 1");
        for (int i = 0; i < count; ++i) {
            auto t = experiments::random_isserlis_triple(
                dim, random::stream_seed(c.seed, static_cast<std::uint64_t>(i),
                                         random::Role::direction));
            cases.push_back({"random", dim, std::move(t.model), std::move(t.v), std::move(t.h)});
        }
    }
    if (cases.empty()) throw ConfigError("isserlis needs cases or random_cases");
    Acceptance acc(top);
    const double max_z = acc.number("max_z").value_or(4.0);
    acc.finish(top);
    top.finish();

    std::vector<experiments::IsserlisCheck> checks(cases.size());
    parallel_for(cases.size(), c.threads, [&](std::size_t i) {
        checks[i] = experiments::isserlis_check(
            cases[i].model, cases[i].v, cases[i].h, c.reps,
            random::stream_seed(c.seed, i, random::Role::oracle));
    });

    Table table({"case", "kind", "dim", "var_x", "var_y", "cov_xy", "closed_form", "mc_variance",
                 "mc_se", "z", "lower_ok", "upper_ok"});
    Json rows = Json::array();
    CommandResult res;
    double worst_z = 0.0;
    bool sandwich = true;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto& k = checks[i];
        const double z = (k.mc_variance - k.closed_form) / k.mc_se;
        worst_z = std::max(worst_z, std::abs(z));
        sandwich = sandwich && k.lower_ok && k.upper_ok;
        table.put(i).put(cases[i].kind).put(static_cast<Eigen::Index>(cases[i].dim));
        table.put(k.var_x).put(k.var_y).put(k.cov_xy).put(k.closed_form).put(k.mc_variance);
        table.put(k.mc_se).put(z).put(k.lower_ok).put(k.upper_ok);
        table.end_row();
        rows.push_back({{"case", i},
                        {"kind", cases[i].kind},
                        {"closed_form", k.closed_form},
                        {"mc_variance", k.mc_variance},
                        {"mc_se", k.mc_se},
                        {"z", z}});
    }
    res.csv = table.str();
    res.checks.push_back(make_check("max_abs_z", worst_z, max_z, worst_z <= max_z));
    res.checks.push_back(make_check("sandwich", sandwich ? 1.0 : 0.0, 1.0, sandwich));
    res.summary["results"] = {{"rows", rows}, {"max_abs_z", worst_z}};
    return res;
}

// ------------------------------------------------------------- finite-sets

matops::Matrix read_index_set(Reader& parent, const std::string& key) {
    Reader r = parent.child(key);
    const auto kind = r.get<std::string>("kind");
    matops::Matrix pts;
    if (kind == "sphere_net") {
        pts = experiments::fibonacci_sphere(r.get<int>("count"));
    } else if (kind == "points") {
        pts = config::parse_matrix(r.raw("points"), r.path_of("points"));
    } else if (kind == "basis") {
        const int dim = r.get<int>("dim");
        if (dim < 1) throw ConfigError(r.path_of("dim") + " must be >= 1");
        pts = matops::Matrix::Identity(dim, dim);
    } else {
        throw ConfigError("index set kind must be sphere_net|points|basis at " + r.path_of("kind"));
    }
    const double scale = r.get_or("scale", 1.0);
    pts *= scale;
    r.finish();
    parent.adopt(key, r);
    return pts;
}

CommandResult cmd_finite_sets(Reader& top, const Overrides& ov) {
    const Common c = read_common(top, ov, 500, 50);
    check_command_key(top, "finite-sets");
    const auto Ns = config::parse_size_list(top.raw("N"), "N");
    const auto u_grid = read_u_grid(top, {1.0, 2.0, 3.0});
    const matops::Matrix T = read_index_set(top, "T");
    const matops::Matrix S = top.has("S") ? read_index_set(top, "S") : T;
    std::vector<samplers::FamilyKind> families;
    if (top.has("families")) {
        const Json& arr = top.raw("families");
        if (!arr.is_array() || arr.empty()) throw ConfigError("families must be a nonempty array");
        for (const auto& f : arr) {
            if (!f.is_string()) throw ConfigError("families must hold strings");
            families.push_back(samplers::parse_family(f.get<std::string>()));
        }
    } else {
        top.set("families", Json::array({"gaussian"}));
        families.push_back(samplers::FamilyKind::gaussian);
    }
    const auto mode = samplers::parse_mode(top.get_or<std::string>("mode", "independent"));
    if (mode == samplers::PairMode::joint) {
        throw ConfigError("finite-sets mode must be independent|shared_source");
    }
    const auto gamma_reps = top.get_or<std::size_t>("gamma_reps", 20000);
    Acceptance acc(top);
    const auto max_spread = acc.number("max_ratio_spread");
    acc.finish(top);
    top.finish();
    for (auto n : Ns) {
        if (n < 1) throw ConfigError("N values must be >= 1");
    }

    const auto Tsum = bounds::summarize_index_set(
        T, gamma_reps, random::stream_seed(c.seed, 0, random::Role::complexity));
    const auto Ssum = bounds::summarize_index_set(
        S, gamma_reps, random::stream_seed(c.seed, 1, random::Role::complexity));

    Table table({"family", "N", "u", "level", "quantile", "reliable", "rate", "ratio", "mean",
                 "std_error"});
    Json rows = Json::array();
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (auto fam : families) {
        for (auto n : Ns) {
            estimators::MonteCarloOptions opts;
            opts.N = n;
            opts.reps = c.reps;
            opts.seed = c.seed;
            opts.u_grid = u_grid;
            opts.threads = c.threads;
            const auto rec = experiments::finite_set_verification(
                Tsum, Ssum, samplers::IsotropicFamily{fam}, mode, opts);
            for (const auto& row : rec.rows) {
                table.put(rec.family).put(n).put(row.u).put(row.quantile.level);
                table.put(row.quantile.value).put(row.quantile.reliable).put(row.rate);
                table.put(row.ratio).put(rec.stats.mean).put(rec.stats.std_error);
                table.end_row();
                rows.push_back({{"family", rec.family},
                                {"N", n},
                                {"u", row.u},
                                {"quantile", row.quantile.value},
                                {"rate", row.rate},
                                {"ratio", row.ratio}});
                if (row.ratio > 0.0) {
                    lo = std::min(lo, row.ratio);
                    hi = std::max(hi, row.ratio);
                }
            }
        }
    }
    CommandResult res;
    res.csv = table.str();
    const double spread = hi > 0.0 && std::isfinite(lo) ? hi / lo
                                                        : std::numeric_limits<double>::quiet_NaN();
    auto set_json = [](const bounds::IndexSetSummary& s) {
        return Json{{"size", s.points.rows()},
                    {"rad", s.rad},
                    {"gamma", s.gamma},
                    {"gamma_se", s.gamma_se},
                    {"stable_dim", s.stable_dim}};
    };
    res.summary["results"] = {
        {"T", set_json(Tsum)}, {"S", set_json(Ssum)}, {"ratio_spread", spread}, {"rows", rows}};
    if (max_spread) {
        res.checks.push_back(
            make_check("ratio_spread", spread, *max_spread, spread <= *max_spread));
    }
    return res;
}

}  // namespace

CommandResult run_command(const std::string& command, const Json& doc,
                          const Overrides& overrides) {
    Reader top(doc, "");
    CommandResult res;
    if (command == "spectrum") {
        res = cmd_spectrum(top, overrides);
    } else if (command == "verify-upper") {
        res = cmd_verify_upper(top, overrides);
    } else if (command == "verify-lower") {
        res = cmd_verify_lower(top, overrides);
    } else if (command == "sweep") {
        res = cmd_sweep(top, overrides);
    } else if (command == "isserlis") {
        res = cmd_isserlis(top, overrides);
    } else if (command == "finite-sets") {
        res = cmd_finite_sets(top, overrides);
    } else {
        throw ConfigError("unknown command '" + command + "'");
    }
    Json summary;
    summary["command"] = command;
    summary["version"] = kVersion;
    summary["config"] = top.resolved();
    summary["results"] = res.summary["results"];
    summary["checks"] = checks_json(res.checks);
    summary["failed_cells"] = res.failed_cells;
    summary["passed"] = res.ok();
    res.summary = std::move(summary);
    return res;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("io_error", "cannot write '" + path.string() + "'");
    }
    out << text;
}

unsigned threads_from_env() {
    if (const char* env = std::getenv("CROSSCOV_LAB_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) {
            return static_cast<unsigned>(v);
        }
        throw ConfigError(std::string("CROSSCOV_LAB_THREADS must be a positive integer, got '") +
                          env + "'");
    }
    return resolve_threads(0);
}

}  // namespace

int main_entry(int argc, char** argv) {
    CLI::App app{"Monte Carlo checks of cross-covariance concentration bounds", "crosscov_lab"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> reps;
    int threads = 0;
    std::string format = "csv";

    for (const auto& name : command_names()) {
        auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
        sub->add_option("--config", config_path, "config file (JSON)")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "master seed override");
        sub->add_option("--reps", reps, "replicate count override");
        sub->add_option("--threads", threads, "worker threads (default: all cores)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--format", format, "stdout format")->check(CLI::IsMember({"csv", "json"}));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    CommandResult res;
    try {
        Overrides ov;
        ov.seed = seed;
        ov.reps = reps;
        ov.threads = threads > 0 ? static_cast<unsigned>(threads) : threads_from_env();
        const Json doc = config::load_file(config_path);
        const auto start = std::chrono::steady_clock::now();
        res = run_command(command, doc, ov);
        res.summary["run"] = {
            {"threads", ov.threads},
            {"wall_seconds",
             std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()}};
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const Error& e) {
        std::cerr << e.code() << ": " << e.what() << "\n";
        return kExitFailed;
    }

    const std::string summary_text = res.summary.dump(2) + "\n";
    try {
        if (!out_dir.empty()) {
            std::filesystem::create_directories(out_dir);
            const std::filesystem::path dir(out_dir);
            write_file(dir / (command + ".csv"), res.csv);
            write_file(dir / (command + ".summary.json"), summary_text);
        } else {
            std::cout << (format == "json" ? summary_text : res.csv);
        }
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitFailed;
    }
    for (const auto& c : res.checks) {
        std::cerr << (c.passed ? "pass " : "FAIL ") << c.name << " value=" << format_double(c.value)
                  << " threshold=" << format_double(c.threshold) << "\n";
    }
    if (res.failed_cells) {
        std::cerr << "FAIL one or more cells failed\n";
    }
    return res.ok() ? kExitOk : kExitFailed;
}

}  // namespace crosscov::cli
