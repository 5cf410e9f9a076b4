#pragma once

#include "crosscov/joint_model.hpp"
#include "crosscov/matops.hpp"
#include "crosscov/random.hpp"
#include "crosscov/spectra.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>

namespace crosscov::samplers {

enum class FamilyKind { gaussian, rademacher, uniform };

/// Coordinate law of an isotropic source vector. All coordinates are
/// independent with mean 0 and variance 1; uniform lives on [-sqrt3, sqrt3].
struct IsotropicFamily {
    FamilyKind kind = FamilyKind::gaussian;

    /// Sub-Gaussian constant used in bound evaluation. Only the Gaussian
    /// value sqrt(8/3) is known in closed form; the other families use it
    /// as a conservative envelope (see `observed_subgaussian_ratio`).
    double K() const;
    std::string name() const;
};

/// sqrt(8/3), the sub-Gaussian constant of a centered Gaussian.
inline const double kGaussianSubGaussianConstant = std::sqrt(8.0 / 3.0);

FamilyKind parse_family(const std::string& name);

enum class PairMode { joint, independent, shared_source };

PairMode parse_mode(const std::string& name);
std::string mode_name(PairMode mode);

/// N paired draws; row i of X and Y form (X_i, Y_i).
struct SampleBatch {
    matops::Matrix X;  // N x d_X
    matops::Matrix Y;  // N x d_Y
    std::optional<matops::Matrix> Z;  // N x d_Y residuals, joint Gaussian only
    std::uint64_t seed = 0;
    std::uint64_t replicate = 0;
    std::string model_label;
    FamilyKind family = FamilyKind::gaussian;
    std::string coupling_label;

    Eigen::Index N() const noexcept { return X.rows(); }
};

/// Fills an N x d matrix with i.i.d. draws from the family, row by row.
void fill_isotropic(matops::Matrix& out, FamilyKind kind, random::Stream& stream);

/// N draws of Sigma^{1/2} Z with isotropic Z from the x_source substream;
/// the single-vector route used by covariance-only computations.
matops::Matrix sample_vectors(const spectra::CovarianceModel& sigma, IsotropicFamily family,
                              Eigen::Index N, std::uint64_t seed, std::uint64_t replicate = 0);

/// X_i = Sigma_X^{1/2} G_i, Y_i = L X_i + Sigma_Z^{1/2} G'_i. Residuals are
/// retained. Deterministic in (model, N, seed, replicate).
SampleBatch sample_joint_gaussian(const joint::JointGaussianModel& model, Eigen::Index N,
                                  std::uint64_t seed, std::uint64_t replicate = 0);

/// X = Sigma_X^{1/2} Z, Y = Sigma_Y^{1/2} W with isotropic Z, W.
/// independent: Z and W use separate substreams. shared_source: one source
/// of dimension max(d_X, d_Y); Z and W are its leading coordinates.
SampleBatch sample_subgaussian_pair(const spectra::CovarianceModel& sigma_x,
                                    const spectra::CovarianceModel& sigma_y,
                                    IsotropicFamily family, PairMode mode, Eigen::Index N,
                                    std::uint64_t seed, std::uint64_t replicate = 0);

/// E X Y^T of the sub-Gaussian pair: zero for independent,
/// Sigma_X^{1/2} J Sigma_Y^{1/2} for shared_source (exactly Sigma_X when
/// both marginals hold the same matrix).
matops::Matrix subgaussian_cross_covariance(const spectra::CovarianceModel& sigma_x,
                                            const spectra::CovarianceModel& sigma_y,
                                            PairMode mode);

/// A configured generator of (X, Y) batches together with the exact
/// cross-covariance its deviations are measured against.
class PairSource {
public:
    static PairSource gaussian(joint::JointGaussianModel model);
    static PairSource subgaussian(spectra::CovarianceModel sigma_x,
                                  spectra::CovarianceModel sigma_y, IsotropicFamily family,
                                  PairMode mode);

    SampleBatch draw(Eigen::Index N, std::uint64_t seed, std::uint64_t replicate) const;

    const matops::Matrix& cross_covariance() const noexcept { return cross_; }
    const spectra::CovarianceModel& sigma_x() const;
    const spectra::CovarianceModel& sigma_y() const;
    IsotropicFamily family() const noexcept { return family_; }
    PairMode mode() const noexcept { return mode_; }
    /// Null for sub-Gaussian sources.
    const joint::JointGaussianModel* joint_model() const;
    std::string label() const;

private:
    struct SubGaussian {
        spectra::CovarianceModel sigma_x;
        spectra::CovarianceModel sigma_y;
    };

    PairSource(std::variant<joint::JointGaussianModel, SubGaussian> impl, matops::Matrix cross,
               IsotropicFamily family, PairMode mode)
        : impl_(std::move(impl)), cross_(std::move(cross)), family_(family), mode_(mode) {}

    std::variant<joint::JointGaussianModel, SubGaussian> impl_;
    matops::Matrix cross_;
    IsotropicFamily family_;
    PairMode mode_;
};

/// Empirical psi_2 norm: root t of mean(exp(Z_i^2 / t^2)) = 2 by bisection
/// on [max|Z| / 50, 2 max|Z|], 1e-6 relative tolerance. Diagnostic only;
/// biased downward for heavy tails. Throws EstimateUnstable without a
/// sign change and InvalidArgument for fewer than 1e4 samples.
double psi2_estimate(std::span<const double> samples);

/// Largest psi_2 / L_2 ratio of <X, v> observed over `n_directions`
/// seeded unit directions in R^dim (the first dim directions are the
/// coordinate axes). A lower estimate of the sub-Gaussian constant.
double observed_subgaussian_ratio(FamilyKind kind, int dim, int n_directions,
                                  Eigen::Index samples, std::uint64_t seed);

}  // namespace crosscov::samplers
