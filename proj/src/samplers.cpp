#include "crosscov/samplers.hpp"

#include "crosscov/errors.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace crosscov::samplers {

using matops::Matrix;

double IsotropicFamily::K() const { return kGaussianSubGaussianConstant; }

std::string IsotropicFamily::name() const {
    switch (kind) {
        case FamilyKind::gaussian: return "gaussian";
        case FamilyKind::rademacher: return "rademacher";
        case FamilyKind::uniform: return "uniform";
    }
    return "unknown";
}

FamilyKind parse_family(const std::string& name) {
    if (name == "gaussian") return FamilyKind::gaussian;
    if (name == "rademacher") return FamilyKind::rademacher;
    if (name == "uniform") return FamilyKind::uniform;
    throw ConfigError("unknown family '" + name + "' (expected gaussian|rademacher|uniform)");
}

PairMode parse_mode(const std::string& name) {
    if (name == "joint") return PairMode::joint;
    if (name == "independent") return PairMode::independent;
    if (name == "shared_source") return PairMode::shared_source;
    throw ConfigError("unknown mode '" + name + "' (expected joint|independent|shared_source)");
}

std::string mode_name(PairMode mode) {
    switch (mode) {
        case PairMode::joint: return "joint";
        case PairMode::independent: return "independent";
        case PairMode::shared_source: return "shared_source";
    }
    return "unknown";
}

void fill_isotropic(Matrix& out, FamilyKind kind, random::Stream& stream) {
    static const double sqrt3 = std::sqrt(3.0);
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        for (Eigen::Index j = 0; j < out.cols(); ++j) {
            switch (kind) {
                case FamilyKind::gaussian: out(i, j) = stream.normal(); break;
                case FamilyKind::rademacher: out(i, j) = stream.rademacher(); break;
                case FamilyKind::uniform: out(i, j) = sqrt3 * (2.0 * stream.uniform() - 1.0); break;
            }
        }
    }
}

namespace {

bool is_diagonal(const Matrix& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            if (i != j && m(i, j) != 0.0) {
                return false;
            }
        }
    }
    return true;
}

// Rows of `source` are isotropic draws; returns rows of source * S.
Matrix apply_sqrt(const Matrix& source, const matops::SymMatrix& sqrt, bool diagonal) {
    if (diagonal) {
        return source * sqrt.matrix().diagonal().asDiagonal();
    }
    return source * sqrt.matrix();
}

Matrix draw_source(Eigen::Index rows, Eigen::Index cols, FamilyKind kind, std::uint64_t seed,
                   std::uint64_t replicate, random::Role role) {
    random::Stream stream(seed, replicate, role);
    Matrix m(rows, cols);
    fill_isotropic(m, kind, stream);
    return m;
}

}  // namespace

Matrix sample_vectors(const spectra::CovarianceModel& sigma, IsotropicFamily family,
                      Eigen::Index N, std::uint64_t seed, std::uint64_t replicate) {
    if (N < 1) {
        throw InvalidArgument("sample size N must be >= 1");
    }
    const Matrix z = draw_source(N, sigma.dim(), family.kind, seed, replicate,
                                 random::Role::x_source);
    return apply_sqrt(z, sigma.sqrt(), sigma.is_diagonal());
}

SampleBatch sample_joint_gaussian(const joint::JointGaussianModel& model, Eigen::Index N,
                                  std::uint64_t seed, std::uint64_t replicate) {
    if (N < 1) {
        throw InvalidArgument("sample size N must be >= 1");
    }
    const Eigen::Index dx = model.sigma_x.dim();
    const Eigen::Index dy = model.sigma_y.dim();

    const Matrix g = draw_source(N, dx, FamilyKind::gaussian, seed, replicate,
                                 random::Role::x_source);
    Matrix x = apply_sqrt(g, model.sigma_x.sqrt(), model.sigma_x.is_diagonal());

    const Matrix g_res = draw_source(N, dy, FamilyKind::gaussian, seed, replicate,
                                     random::Role::z_residual);
    Matrix z = apply_sqrt(g_res, model.sigma_z_sqrt, is_diagonal(model.sigma_z_sqrt.matrix()));

    Matrix y = z;
    if (model.L.cwiseAbs().maxCoeff() != 0.0) {
        y.noalias() += x * model.L.transpose();
    }

    SampleBatch batch;
    batch.X = std::move(x);
    batch.Y = std::move(y);
    batch.Z = std::move(z);
    batch.seed = seed;
    batch.replicate = replicate;
    batch.model_label = model.sigma_x.label() + "|" + model.sigma_y.label();
    batch.family = FamilyKind::gaussian;
    batch.coupling_label = model.coupling_label;
    return batch;
}

SampleBatch sample_subgaussian_pair(const spectra::CovarianceModel& sigma_x,
                                    const spectra::CovarianceModel& sigma_y,
                                    IsotropicFamily family, PairMode mode, Eigen::Index N,
                                    std::uint64_t seed, std::uint64_t replicate) {
    if (N < 1) {
        throw InvalidArgument("sample size N must be >= 1");
    }
    const Eigen::Index dx = sigma_x.dim();
    const Eigen::Index dy = sigma_y.dim();
    SampleBatch batch;
    if (mode == PairMode::shared_source) {
        const Matrix source = draw_source(N, std::max(dx, dy), family.kind, seed, replicate,
                                          random::Role::x_source);
        batch.X = apply_sqrt(source.leftCols(dx), sigma_x.sqrt(), sigma_x.is_diagonal());
        batch.Y = apply_sqrt(source.leftCols(dy), sigma_y.sqrt(), sigma_y.is_diagonal());
    } else if (mode == PairMode::independent) {
        const Matrix z = draw_source(N, dx, family.kind, seed, replicate, random::Role::x_source);
        const Matrix w = draw_source(N, dy, family.kind, seed, replicate, random::Role::w_source);
        batch.X = apply_sqrt(z, sigma_x.sqrt(), sigma_x.is_diagonal());
        batch.Y = apply_sqrt(w, sigma_y.sqrt(), sigma_y.is_diagonal());
    } else {
        throw InvalidArgument("sub-Gaussian pairs support modes independent|shared_source");
    }
    batch.seed = seed;
    batch.replicate = replicate;
    batch.model_label = sigma_x.label() + "|" + sigma_y.label();
    batch.family = family.kind;
    batch.coupling_label = mode_name(mode);
    return batch;
}

Matrix subgaussian_cross_covariance(const spectra::CovarianceModel& sigma_x,
                                    const spectra::CovarianceModel& sigma_y, PairMode mode) {
    const Eigen::Index dx = sigma_x.dim();
    const Eigen::Index dy = sigma_y.dim();
    if (mode != PairMode::shared_source) {
        return Matrix::Zero(dx, dy);
    }
    if (dx == dy && sigma_x.matrix().matrix() == sigma_y.matrix().matrix()) {
        return sigma_x.matrix().matrix();
    }
    const Eigen::Index m = std::min(dx, dy);
    return sigma_x.sqrt().matrix().leftCols(m) * sigma_y.sqrt().matrix().topRows(m);
}

PairSource PairSource::gaussian(joint::JointGaussianModel model) {
    Matrix cross = model.sigma_xy;
    return PairSource(std::move(model), std::move(cross), IsotropicFamily{FamilyKind::gaussian},
                      PairMode::joint);
}

PairSource PairSource::subgaussian(spectra::CovarianceModel sigma_x,
                                   spectra::CovarianceModel sigma_y, IsotropicFamily family,
                                   PairMode mode) {
    if (mode == PairMode::joint) {
        throw InvalidArgument("mode 'joint' needs a Gaussian joint model");
    }
    Matrix cross = subgaussian_cross_covariance(sigma_x, sigma_y, mode);
    return PairSource(SubGaussian{std::move(sigma_x), std::move(sigma_y)}, std::move(cross),
                      family, mode);
}

SampleBatch PairSource::draw(Eigen::Index N, std::uint64_t seed, std::uint64_t replicate) const {
    if (const auto* model = std::get_if<joint::JointGaussianModel>(&impl_)) {
        return sample_joint_gaussian(*model, N, seed, replicate);
    }
    const auto& sub = std::get<SubGaussian>(impl_);
    return sample_subgaussian_pair(sub.sigma_x, sub.sigma_y, family_, mode_, N, seed, replicate);
}

const spectra::CovarianceModel& PairSource::sigma_x() const {
    if (const auto* model = std::get_if<joint::JointGaussianModel>(&impl_)) {
        return model->sigma_x;
    }
    return std::get<SubGaussian>(impl_).sigma_x;
}

const spectra::CovarianceModel& PairSource::sigma_y() const {
    if (const auto* model = std::get_if<joint::JointGaussianModel>(&impl_)) {
        return model->sigma_y;
    }
    return std::get<SubGaussian>(impl_).sigma_y;
}

const joint::JointGaussianModel* PairSource::joint_model() const {
    return std::get_if<joint::JointGaussianModel>(&impl_);
}

std::string PairSource::label() const {
    if (const auto* model = joint_model()) {
        return model->label() + "|gaussian";
    }
    return sigma_x().label() + "|" + sigma_y().label() + "|" + mode_name(mode_) + "|" +
           family_.name();
}

double psi2_estimate(std::span<const double> samples) {
    if (samples.size() < 10000) {
        throw InvalidArgument("psi2_estimate needs at least 1e4 samples");
    }
    double max_abs = 0.0;
    for (double z : samples) {
        max_abs = std::max(max_abs, std::abs(z));
    }
    if (!(max_abs > 0.0) || !std::isfinite(max_abs)) {
        throw EstimateUnstable("psi2 estimate needs finite, not identically zero samples");
    }
    const double n = static_cast<double>(samples.size());
    auto excess = [&](double t) {
        const double inv = 1.0 / (t * t);
        double acc = 0.0;
        for (double z : samples) {
            acc += std::exp(z * z * inv);
        }
        return acc / n - 2.0;
    };
    double lo = max_abs / 50.0;
    double hi = 2.0 * max_abs;
    if (!(excess(lo) > 0.0) || !(excess(hi) <= 0.0)) {
        throw EstimateUnstable("no sign change of E exp(Z^2/t^2) - 2 on the bracket");
    }
    while (hi - lo > 1e-6 * lo) {
        const double mid = 0.5 * (lo + hi);
        if (excess(mid) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double observed_subgaussian_ratio(FamilyKind kind, int dim, int n_directions,
                                  Eigen::Index samples, std::uint64_t seed) {
    if (dim < 1 || n_directions < 1) {
        throw InvalidArgument("need dim >= 1 and at least one direction");
    }
    const Matrix x = draw_source(samples, dim, kind, seed, 0, random::Role::oracle);
    random::Stream dir_stream(seed, 0, random::Role::direction);
    double best = 0.0;
    std::vector<double> proj(static_cast<std::size_t>(samples));
    for (int k = 0; k < n_directions; ++k) {
        matops::Vector v = matops::Vector::Zero(dim);
        if (k < dim) {
            v(k) = 1.0;
        } else {
            for (int j = 0; j < dim; ++j) {
                v(j) = dir_stream.normal();
            }
            v /= v.norm();
        }
        const matops::Vector p = x * v;
        std::copy(p.data(), p.data() + p.size(), proj.begin());
        const double l2 = std::sqrt(p.squaredNorm() / static_cast<double>(samples));
        best = std::max(best, psi2_estimate(proj) / l2);
    }
    return best;
}

}  // namespace crosscov::samplers
