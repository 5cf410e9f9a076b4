#pragma once

#include "crosscov/matops.hpp"
#include "crosscov/spectra.hpp"

#include <optional>
#include <string>

namespace crosscov::joint {

/// Cross-coupling of two marginals through
/// Sigma_XY = Sigma_X^{1/2} C Sigma_Y^{1/2} with ||C|| < 1.
struct CouplingSpec {
    enum class Mode { independent, aligned, custom };

    Mode mode = Mode::independent;
    double rho = 0.0;
    matops::Matrix custom;  // d_X x d_Y, only for Mode::custom

    static CouplingSpec independent();
    /// rho in [0, 1); values above 1 - 1e-9 are capped there.
    static CouplingSpec aligned(double rho);
    static CouplingSpec custom_matrix(matops::Matrix c);

    std::string label() const;
};

inline constexpr double kMaxCouplingNorm = 1.0 - 1e-9;

/// C for the given marginals: rho * V_X J V_Y^T for aligned (J couples the
/// i-th eigenvector of X with the i-th of Y), zero for independent.
/// Throws InvalidCoupling on out-of-range parameters or shapes.
matops::Matrix coupling_matrix(const CouplingSpec& coupling, const spectra::CovarianceModel& x,
                               const spectra::CovarianceModel& y);

struct RegressionDecomposition {
    matops::Matrix L;  // d_Y x d_X, Sigma_YX Sigma_X^+
    matops::SymMatrix sigma_z;  // Sigma_Y - L Sigma_X L^T
};

/// Gaussian regression Y = L X + Z with Z independent of X.
/// Throws NotPSD when Sigma_Z has an eigenvalue below -1e-10 ||Sigma_Y||.
RegressionDecomposition regression_decompose(const spectra::CovarianceModel& x,
                                             const spectra::CovarianceModel& y,
                                             const matops::Matrix& sigma_xy);

/// Jointly Gaussian (X, Y) together with its regression decomposition.
struct JointGaussianModel {
    spectra::CovarianceModel sigma_x;
    spectra::CovarianceModel sigma_y;
    matops::Matrix sigma_xy;  // d_X x d_Y
    matops::Matrix L;
    matops::SymMatrix sigma_z;
    matops::SymMatrix sigma_z_sqrt;
    matops::SymMatrix P;  // L Sigma_X L^T
    matops::SymMatrix Q;  // Sigma_Z
    double r_x;
    double r_y;
    std::optional<double> r_p;  // absent when P is zero
    std::optional<double> r_q;  // absent when Q is zero
    std::string coupling_label;

    std::string label() const;
};

/// Builds the joint model from marginals and a coupling.
/// Throws InfeasibleCoupling if the joint block matrix is not PSD.
JointGaussianModel assemble(const spectra::CovarianceModel& sigma_x,
                            const spectra::CovarianceModel& sigma_y,
                            const CouplingSpec& coupling);

/// The X = Y pathway: Sigma_X = Sigma_Y = Sigma_XY = Sigma, so L is the
/// projector onto range(Sigma) and Sigma_Z = 0.
JointGaussianModel assemble_identical(const spectra::CovarianceModel& sigma);

}  // namespace crosscov::joint
