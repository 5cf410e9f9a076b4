#include "crosscov/joint_model.hpp"

#include "crosscov/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace crosscov::joint {

using matops::Matrix;
using matops::SymMatrix;

CouplingSpec CouplingSpec::independent() { return CouplingSpec{}; }

CouplingSpec CouplingSpec::aligned(double rho) {
    if (!(rho >= 0.0 && rho < 1.0)) {
        throw InvalidCoupling("aligned coupling needs rho in [0, 1)");
    }
    CouplingSpec c;
    c.mode = Mode::aligned;
    c.rho = std::min(rho, kMaxCouplingNorm);
    return c;
}

CouplingSpec CouplingSpec::custom_matrix(Matrix m) {
    CouplingSpec c;
    c.mode = Mode::custom;
    c.custom = std::move(m);
    return c;
}

std::string CouplingSpec::label() const {
    std::ostringstream os;
    os.precision(6);
    switch (mode) {
        case Mode::independent: return "independent";
        case Mode::aligned: os << "aligned(rho=" << rho << ")"; return os.str();
        case Mode::custom: os << "custom(" << custom.rows() << "x" << custom.cols() << ")"; return os.str();
    }
    return "unknown";
}

Matrix coupling_matrix(const CouplingSpec& coupling, const spectra::CovarianceModel& x,
                       const spectra::CovarianceModel& y) {
    const Eigen::Index dx = x.dim();
    const Eigen::Index dy = y.dim();
    switch (coupling.mode) {
        case CouplingSpec::Mode::independent: return Matrix::Zero(dx, dy);
        case CouplingSpec::Mode::aligned: {
            if (!(coupling.rho >= 0.0 && coupling.rho <= kMaxCouplingNorm)) {
                throw InvalidCoupling("aligned coupling needs rho in [0, 1 - 1e-9]");
            }
            const Eigen::Index m = std::min(dx, dy);
            return coupling.rho * x.eig().eigenvectors.leftCols(m) *
                   y.eig().eigenvectors.leftCols(m).transpose();
        }
        case CouplingSpec::Mode::custom: {
            if (coupling.custom.rows() != dx || coupling.custom.cols() != dy) {
                throw InvalidCoupling("custom coupling matrix has the wrong shape");
            }
            const double norm = matops::operator_norm(coupling.custom, matops::NormMethod::exact);
            if (norm > kMaxCouplingNorm) {
                throw InvalidCoupling("custom coupling matrix needs operator norm <= 1 - 1e-9");
            }
            return coupling.custom;
        }
    }
    throw InvalidCoupling("unknown coupling mode");
}

RegressionDecomposition regression_decompose(const spectra::CovarianceModel& x,
                                             const spectra::CovarianceModel& y,
                                             const Matrix& sigma_xy) {
    if (sigma_xy.rows() != x.dim() || sigma_xy.cols() != y.dim()) {
        throw ShapeError("cross-covariance shape does not match the marginals");
    }
    const SymMatrix x_pinv = matops::pseudo_inverse(x.matrix());
    Matrix L = sigma_xy.transpose() * x_pinv.matrix();
    const Matrix explained = L * x.matrix().matrix() * L.transpose();
    SymMatrix sigma_z = SymMatrix::symmetrized(y.matrix().matrix() - explained);
    const matops::EigenDecomp eig = matops::sym_eigen(sigma_z);
    const double floor = -matops::kPsdRelTol * y.op_norm();
    if (eig.eigenvalues(eig.eigenvalues.size() - 1) < floor) {
        throw NotPSD("residual covariance Sigma_Z is not PSD");
    }
    return {std::move(L), std::move(sigma_z)};
}

namespace {

// PSD check of [[Sx, Sxy], [Sxy^T, Sy]].
void check_joint_psd(const spectra::CovarianceModel& x, const spectra::CovarianceModel& y,
                     const Matrix& sigma_xy) {
    const Eigen::Index dx = x.dim();
    const Eigen::Index dy = y.dim();
    Matrix joint(dx + dy, dx + dy);
    joint.topLeftCorner(dx, dx) = x.matrix().matrix();
    joint.topRightCorner(dx, dy) = sigma_xy;
    joint.bottomLeftCorner(dy, dx) = sigma_xy.transpose();
    joint.bottomRightCorner(dy, dy) = y.matrix().matrix();
    Eigen::SelfAdjointEigenSolver<Matrix> solver(joint, Eigen::EigenvaluesOnly);
    const double top = solver.eigenvalues()(dx + dy - 1);
    const double bottom = solver.eigenvalues()(0);
    if (bottom < -matops::kPsdRelTol * top) {
        throw InfeasibleCoupling("joint covariance is not PSD (min eigenvalue " +
                                 std::to_string(bottom) + ")");
    }
}

std::optional<double> rank_if_nonzero(const SymMatrix& m, double reference_norm) {
    const matops::EigenDecomp eig = matops::sym_eigen(m);
    const double top = eig.eigenvalues(0);
    if (top <= matops::kPsdRelTol * reference_norm) {
        return std::nullopt;
    }
    return m.trace() / top;
}

JointGaussianModel finish(const spectra::CovarianceModel& sigma_x,
                          const spectra::CovarianceModel& sigma_y, Matrix sigma_xy,
                          RegressionDecomposition reg, std::string coupling_label) {
    SymMatrix P = SymMatrix::symmetrized(reg.L * sigma_x.matrix().matrix() * reg.L.transpose());
    SymMatrix sigma_z_sqrt = matops::psd_sqrt(reg.sigma_z);
    std::optional<double> r_p = rank_if_nonzero(P, sigma_y.op_norm());
    std::optional<double> r_q = rank_if_nonzero(reg.sigma_z, sigma_y.op_norm());
    SymMatrix Q = reg.sigma_z;
    return JointGaussianModel{sigma_x,
                              sigma_y,
                              std::move(sigma_xy),
                              std::move(reg.L),
                              std::move(reg.sigma_z),
                              std::move(sigma_z_sqrt),
                              std::move(P),
                              std::move(Q),
                              sigma_x.eff_rank(),
                              sigma_y.eff_rank(),
                              r_p,
                              r_q,
                              std::move(coupling_label)};
}

}  // namespace

std::string JointGaussianModel::label() const {
    return sigma_x.label() + "|" + sigma_y.label() + "|" + coupling_label;
}

JointGaussianModel assemble(const spectra::CovarianceModel& sigma_x,
                            const spectra::CovarianceModel& sigma_y,
                            const CouplingSpec& coupling) {
    if (coupling.mode == CouplingSpec::Mode::independent) {
        const Eigen::Index dx = sigma_x.dim();
        const Eigen::Index dy = sigma_y.dim();
        RegressionDecomposition reg{Matrix::Zero(dy, dx), sigma_y.matrix()};
        return finish(sigma_x, sigma_y, Matrix::Zero(dx, dy), std::move(reg), coupling.label());
    }
    const Matrix c = coupling_matrix(coupling, sigma_x, sigma_y);
    Matrix sigma_xy = sigma_x.sqrt().matrix() * c * sigma_y.sqrt().matrix();
    check_joint_psd(sigma_x, sigma_y, sigma_xy);
    RegressionDecomposition reg = regression_decompose(sigma_x, sigma_y, sigma_xy);
    return finish(sigma_x, sigma_y, std::move(sigma_xy), std::move(reg), coupling.label());
}

JointGaussianModel assemble_identical(const spectra::CovarianceModel& sigma) {
    Matrix sigma_xy = sigma.matrix().matrix();
    const SymMatrix pinv = matops::pseudo_inverse(sigma.matrix());
    Matrix L = sigma_xy.transpose() * pinv.matrix();
    // Sigma_Z vanishes on range(Sigma); computing it by subtraction would
    // only leave roundoff, so it is set to zero directly.
    RegressionDecomposition reg{std::move(L), SymMatrix::zero(sigma.dim())};
    return finish(sigma, sigma, std::move(sigma_xy), std::move(reg), "identical");
}

}  // namespace crosscov::joint
