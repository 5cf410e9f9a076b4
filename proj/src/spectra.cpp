#include "crosscov/spectra.hpp"

#include "crosscov/errors.hpp"
#include "crosscov/random.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace crosscov::spectra {

SpectrumSpec SpectrumSpec::flat(int d, double scale) {
    SpectrumSpec s;
    s.family = Family::flat;
    s.d = d;
    s.scale = scale;
    return s;
}

SpectrumSpec SpectrumSpec::poly(int d, double alpha, double scale) {
    SpectrumSpec s;
    s.family = Family::poly;
    s.d = d;
    s.alpha = alpha;
    s.scale = scale;
    return s;
}

SpectrumSpec SpectrumSpec::exp_decay(int d, double beta, double scale) {
    SpectrumSpec s;
    s.family = Family::exp_decay;
    s.d = d;
    s.beta = beta;
    s.scale = scale;
    return s;
}

SpectrumSpec SpectrumSpec::spiked(int d, int k, double spike, double scale) {
    SpectrumSpec s;
    s.family = Family::spiked;
    s.d = d;
    s.k = k;
    s.spike = spike;
    s.scale = scale;
    return s;
}

SpectrumSpec SpectrumSpec::custom(std::vector<double> values, double scale) {
    SpectrumSpec s;
    s.family = Family::custom;
    s.d = static_cast<int>(values.size());
    s.values = std::move(values);
    s.scale = scale;
    return s;
}

int SpectrumSpec::dim() const {
    return family == Family::custom ? static_cast<int>(values.size()) : d;
}

std::string SpectrumSpec::label() const {
    std::ostringstream os;
    os.precision(6);
    switch (family) {
        case Family::flat: os << "flat(d=" << d; break;
        case Family::poly: os << "poly(d=" << d << ",alpha=" << alpha; break;
        case Family::exp_decay: os << "exp_decay(d=" << d << ",beta=" << beta; break;
        case Family::spiked: os << "spiked(d=" << d << ",k=" << k << ",s=" << spike; break;
        case Family::custom: os << "custom(d=" << values.size(); break;
    }
    if (scale != 1.0) {
        os << ",scale=" << scale;
    }
    os << ")";
    return os.str();
}

void SpectrumSpec::validate() const {
    if (!(scale > 0.0) || !std::isfinite(scale)) {
        throw InvalidSpectrum("scale must be a positive finite number");
    }
    if (family != Family::custom && d < 1) {
        throw InvalidSpectrum("dimension must be >= 1");
    }
    switch (family) {
        case Family::flat: break;
        case Family::poly:
            if (!(alpha > 0.0) || !std::isfinite(alpha)) {
                throw InvalidSpectrum("poly spectrum needs alpha > 0");
            }
            break;
        case Family::exp_decay:
            if (!(beta > 0.0) || !std::isfinite(beta)) {
                throw InvalidSpectrum("exp_decay spectrum needs beta > 0");
            }
            break;
        case Family::spiked:
            if (k < 0 || k > d) {
                throw InvalidSpectrum("spiked spectrum needs 0 <= k <= d");
            }
            if (!(spike >= 1.0) || !std::isfinite(spike)) {
                throw InvalidSpectrum("spiked spectrum needs spike >= 1");
            }
            break;
        case Family::custom:
            if (values.empty()) {
                throw InvalidSpectrum("custom spectrum is empty");
            }
            for (double v : values) {
                if (!std::isfinite(v) || v < 0.0) {
                    throw InvalidSpectrum("custom eigenvalues must be finite and non-negative");
                }
            }
            if (std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; })) {
                throw InvalidSpectrum("custom spectrum is all zero");
            }
            break;
    }
}

std::vector<double> eigenvalues(const SpectrumSpec& spec) {
    spec.validate();
    std::vector<double> out;
    const int d = spec.dim();
    out.reserve(static_cast<std::size_t>(d));
    switch (spec.family) {
        case Family::flat: out.assign(static_cast<std::size_t>(d), spec.scale); break;
        case Family::poly:
            for (int j = 1; j <= d; ++j) {
                out.push_back(spec.scale * std::pow(static_cast<double>(j), -spec.alpha));
            }
            break;
        case Family::exp_decay:
            for (int j = 1; j <= d; ++j) {
                out.push_back(spec.scale * std::exp(-spec.beta * (j - 1)));
            }
            break;
        case Family::spiked:
            out.assign(static_cast<std::size_t>(spec.k), spec.scale * spec.spike);
            out.resize(static_cast<std::size_t>(d), spec.scale);
            break;
        case Family::custom:
            for (double v : spec.values) {
                out.push_back(spec.scale * v);
            }
            std::sort(out.begin(), out.end(), std::greater<>());
            break;
    }
    if (out.back() == 0.0 && out.front() == 0.0) {
        throw InvalidSpectrum("spectrum underflowed to zero");
    }
    return out;
}

double analytic_effective_rank(const SpectrumSpec& spec) {
    const std::vector<double> ev = eigenvalues(spec);
    // Sum smallest first for accuracy on decaying profiles.
    const double trace = std::accumulate(ev.rbegin(), ev.rend(), 0.0);
    return trace / ev.front();
}

CovarianceModel::CovarianceModel(matops::SymMatrix matrix, matops::EigenDecomp eig,
                                 double trace, std::string label, bool diagonal)
    : matrix_(std::move(matrix)),
      eig_(std::move(eig)),
      sqrt_(matops::psd_sqrt(eig_)),
      op_norm_(std::max(eig_.eigenvalues(0), 0.0)),
      trace_(trace),
      eff_rank_(0.0),
      label_(std::move(label)),
      diagonal_(diagonal) {
    if (op_norm_ <= 0.0) {
        throw ZeroCovariance("covariance '" + label_ + "' is zero");
    }
    eff_rank_ = trace_ / op_norm_;
}

CovarianceModel CovarianceModel::from_matrix(matops::SymMatrix matrix, std::string label) {
    matops::EigenDecomp eig = matops::sym_eigen(matrix);
    matops::require_psd(eig, matops::kPsdRelTol, "covariance");
    const matops::Matrix& m = matrix.matrix();
    const bool diagonal = (m - matops::Matrix(m.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;
    const double trace = matrix.trace();
    return CovarianceModel(std::move(matrix), std::move(eig), trace, std::move(label), diagonal);
}

matops::Matrix random_orthogonal(Eigen::Index dim, std::uint64_t seed) {
    random::Stream stream(seed, static_cast<std::uint64_t>(dim), random::Role::rotation);
    matops::Matrix g(dim, dim);
    // Column-major fill order is part of the reproducibility contract.
    for (Eigen::Index j = 0; j < dim; ++j) {
        for (Eigen::Index i = 0; i < dim; ++i) {
            g(i, j) = stream.normal();
        }
    }
    Eigen::HouseholderQR<matops::Matrix> qr(g);
    matops::Matrix q = qr.householderQ() * matops::Matrix::Identity(dim, dim);
    const matops::Matrix& r = qr.matrixQR();
    for (Eigen::Index j = 0; j < dim; ++j) {
        if (r(j, j) < 0.0) {
            q.col(j) = -q.col(j);
        }
    }
    return q;
}

CovarianceModel build_covariance(const SpectrumSpec& spec,
                                 std::optional<std::uint64_t> rotation_seed) {
    const std::vector<double> ev = eigenvalues(spec);
    const Eigen::Index d = static_cast<Eigen::Index>(ev.size());
    matops::Vector lambda = Eigen::Map<const matops::Vector>(ev.data(), d);
    const double trace = std::accumulate(ev.rbegin(), ev.rend(), 0.0);

    std::string label = spec.label();
    if (!rotation_seed) {
        matops::EigenDecomp eig{lambda, matops::Matrix::Identity(d, d)};
        return CovarianceModel(matops::SymMatrix::diagonal(lambda), std::move(eig), trace,
                               std::move(label), true);
    }
    matops::Matrix q = random_orthogonal(d, *rotation_seed);
    matops::Matrix m = q * lambda.asDiagonal() * q.transpose();
    label += "@rot" + std::to_string(*rotation_seed);
    matops::EigenDecomp eig{lambda, std::move(q)};
    return CovarianceModel(matops::SymMatrix::symmetrized(m), std::move(eig), trace,
                           std::move(label), false);
}

}  // namespace crosscov::spectra
