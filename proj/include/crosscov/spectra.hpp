#pragma once

#include "crosscov/matops.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace crosscov::spectra {

enum class Family { flat, poly, exp_decay, spiked, custom };

/// Parametrized eigenvalue profile.
///
///   flat(d)          d copies of scale
///   poly(d, a)       scale * j^-a,            j = 1..d
///   exp_decay(d, b)  scale * exp(-b (j - 1)), j = 1..d
///   spiked(d, k, s)  k copies of scale * s, then d - k copies of scale
///   custom(list)     user values, sorted descending
struct SpectrumSpec {
    Family family = Family::flat;
    int d = 1;
    double alpha = 0.0;
    double beta = 0.0;
    int k = 0;
    double spike = 1.0;
    std::vector<double> values;
    double scale = 1.0;

    static SpectrumSpec flat(int d, double scale = 1.0);
    static SpectrumSpec poly(int d, double alpha, double scale = 1.0);
    static SpectrumSpec exp_decay(int d, double beta, double scale = 1.0);
    static SpectrumSpec spiked(int d, int k, double spike, double scale = 1.0);
    static SpectrumSpec custom(std::vector<double> values, double scale = 1.0);

    int dim() const;
    /// e.g. "poly(d=100,alpha=2)".
    std::string label() const;
    /// Throws InvalidSpectrum when parameters are out of range.
    void validate() const;
};

/// Eigenvalues sorted descending. Throws InvalidSpectrum.
std::vector<double> eigenvalues(const SpectrumSpec& spec);

/// tr / max computed from the profile itself, not from a matrix.
double analytic_effective_rank(const SpectrumSpec& spec);

/// Covariance matrix with cached spectral data. Immutable.
class CovarianceModel {
public:
    /// Wraps an arbitrary PSD matrix; the eigendecomposition is computed.
    static CovarianceModel from_matrix(matops::SymMatrix matrix, std::string label);

    const matops::SymMatrix& matrix() const noexcept { return matrix_; }
    const matops::EigenDecomp& eig() const noexcept { return eig_; }
    /// Sigma^{1/2}, computed once at construction.
    const matops::SymMatrix& sqrt() const noexcept { return sqrt_; }
    double op_norm() const noexcept { return op_norm_; }
    double trace() const noexcept { return trace_; }
    double eff_rank() const noexcept { return eff_rank_; }
    const std::string& label() const noexcept { return label_; }
    Eigen::Index dim() const noexcept { return matrix_.dim(); }
    /// True when the matrix is diagonal (no rotation applied).
    bool is_diagonal() const noexcept { return diagonal_; }

private:
    friend CovarianceModel build_covariance(const SpectrumSpec&, std::optional<std::uint64_t>);
    CovarianceModel(matops::SymMatrix matrix, matops::EigenDecomp eig, double trace,
                    std::string label, bool diagonal);

    matops::SymMatrix matrix_;
    matops::EigenDecomp eig_;
    matops::SymMatrix sqrt_;
    double op_norm_;
    double trace_;
    double eff_rank_;
    std::string label_;
    bool diagonal_;
};

/// Haar-distributed orthogonal matrix from QR of a seeded Gaussian matrix,
/// with the sign convention diag(R) > 0.
matops::Matrix random_orthogonal(Eigen::Index dim, std::uint64_t seed);

/// Diagonal covariance when `rotation_seed` is empty, otherwise
/// Q diag(lambda) Q^T with Q = random_orthogonal(d, seed). Spectral data
/// comes from the spec, not from an eigensolver.
CovarianceModel build_covariance(const SpectrumSpec& spec,
                                 std::optional<std::uint64_t> rotation_seed = std::nullopt);

}  // namespace crosscov::spectra
