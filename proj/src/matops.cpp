#include "crosscov/matops.hpp"

#include "crosscov/errors.hpp"
#include "crosscov/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace crosscov::matops {

namespace {

void check_finite(const Matrix& m) {
    if (!m.allFinite()) {
        throw InvalidMatrix("matrix has non-finite entries");
    }
}

}  // namespace

SymMatrix::SymMatrix(Matrix entries) : entries_(std::move(entries)) {
    if (entries_.rows() < 1 || entries_.rows() != entries_.cols()) {
        throw InvalidMatrix("symmetric matrix must be square with dim >= 1, got " +
                            std::to_string(entries_.rows()) + "x" +
                            std::to_string(entries_.cols()));
    }
    check_finite(entries_);
    const double scale = 1.0 + entries_.cwiseAbs().maxCoeff();
    const double asym = (entries_ - entries_.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * scale) {
        throw InvalidMatrix("matrix is not symmetric (max asymmetry " + std::to_string(asym) +
                            ")");
    }
}

SymMatrix SymMatrix::symmetrized(const Matrix& m) {
    if (m.rows() != m.cols()) {
        throw InvalidMatrix("cannot symmetrize a non-square matrix");
    }
    Matrix s = 0.5 * (m + m.transpose());
    return SymMatrix(std::move(s));
}

SymMatrix SymMatrix::identity(Eigen::Index dim) {
    return SymMatrix(Matrix::Identity(dim, dim));
}

SymMatrix SymMatrix::diagonal(const Vector& diag) {
    return SymMatrix(Matrix(diag.asDiagonal()));
}

SymMatrix SymMatrix::zero(Eigen::Index dim) {
    return SymMatrix(Matrix::Zero(dim, dim));
}

EigenDecomp sym_eigen(const SymMatrix& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(a.matrix());
    if (solver.info() != Eigen::Success) {
        throw InvalidMatrix("symmetric eigensolver failed");
    }
    // Eigen sorts ascending; flip to descending.
    return EigenDecomp{solver.eigenvalues().reverse(), solver.eigenvectors().rowwise().reverse()};
}

void require_psd(const EigenDecomp& eig, double rel_tol, const char* what) {
    const double top = std::max(eig.eigenvalues(0), 0.0);
    const double bottom = eig.eigenvalues(eig.eigenvalues.size() - 1);
    if (bottom < -rel_tol * top || (top == 0.0 && bottom < 0.0)) {
        throw NotPSD(std::string(what) + ": eigenvalue " + std::to_string(bottom) +
                     " below tolerance (lambda_max " + std::to_string(top) + ")");
    }
}

SymMatrix psd_sqrt(const EigenDecomp& eig) {
    require_psd(eig, kPsdRelTol, "psd_sqrt");
    // Eigenvalues at the solver's roundoff level count as zeros.
    const double floor = static_cast<double>(eig.eigenvalues.size()) *
                         std::numeric_limits<double>::epsilon() *
                         std::max(eig.eigenvalues(0), 0.0);
    return SymMatrix::symmetrized(
        eig.reconstruct([floor](double l) { return l > floor ? std::sqrt(l) : 0.0; }));
}

SymMatrix psd_sqrt(const SymMatrix& a) { return psd_sqrt(sym_eigen(a)); }

SymMatrix pseudo_inverse(const SymMatrix& a, double rel_tol) {
    const EigenDecomp eig = sym_eigen(a);
    require_psd(eig, kPsdRelTol, "pseudo_inverse");
    const double top = eig.eigenvalues(0);
    if (top <= 0.0) {
        return SymMatrix::zero(a.dim());
    }
    const double cutoff = rel_tol * top;
    return SymMatrix::symmetrized(
        eig.reconstruct([cutoff](double l) { return l > cutoff ? 1.0 / l : 0.0; }));
}

namespace {

struct PowerRun {
    double estimate = 0.0;
    bool converged = false;
    Vector direction;
};

// Block width of the power iteration. The top Ritz value converges at the
// rate (s_{b+1} / s_1)^2 per step rather than (s_2 / s_1)^2.
constexpr Eigen::Index kPowerBlock = 8;

Matrix start_block(Eigen::Index n, Eigen::Index b, std::uint64_t shape_hash, std::uint64_t seed,
                   std::uint64_t attempt) {
    random::Stream stream(shape_hash ^ random::mix64(attempt), seed, random::Role::power_start);
    Matrix v(n, b);
    for (Eigen::Index j = 0; j < b; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            v(i, j) = stream.normal();
        }
    }
    return v;
}

Matrix orthonormalize(const Matrix& v) {
    Eigen::HouseholderQR<Matrix> qr(v);
    return qr.householderQ() * Matrix::Identity(v.rows(), v.cols());
}

// Block power iteration V <- orth(A^T A V) with Rayleigh-Ritz extraction.
// mu_k, the top eigenvalue of (A V_k)^T (A V_k), increases to sigma_max^2;
// the stopping rule extrapolates the remaining gap from the geometric
// decay of successive increments.
PowerRun power_run(const Matrix& a, Matrix v, const PowerOptions& opt) {
    constexpr double eps = std::numeric_limits<double>::epsilon();
    PowerRun run;
    v = orthonormalize(v);
    double mu_prev = -1.0;
    double delta_prev = -1.0;
    for (int k = 0; k < opt.max_iterations; ++k) {
        const Matrix w = a * v;
        const Matrix h = w.transpose() * w;
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.transpose()));
        const Eigen::Index top = h.rows() - 1;
        const double mu = std::max(0.0, es.eigenvalues()(top));
        if (mu == 0.0) {
            break;  // the block lies in the null space; stagnated
        }
        run.estimate = std::max(run.estimate, std::sqrt(mu));
        run.direction = v * es.eigenvectors().col(top);
        if (v.cols() == a.cols()) {
            run.converged = true;  // the block spans the whole domain
            break;
        }
        if (mu_prev >= 0.0) {
            const double delta = mu - mu_prev;
            if (std::abs(delta) <= 8.0 * eps * mu) {
                run.converged = true;
                break;
            }
            if (delta_prev > 0.0 && delta > 0.0) {
                const double ratio = delta / delta_prev;
                if (ratio < 1.0) {
                    const double remaining = delta * ratio / (1.0 - ratio);
                    if (remaining <= 0.1 * opt.rel_tol * mu) {
                        run.converged = true;
                        break;
                    }
                }
            }
            delta_prev = delta;
        }
        mu_prev = mu;
        v = orthonormalize(a.transpose() * w);
    }
    return run;
}

double power_norm(const Matrix& a, const PowerOptions& opt) {
    const std::uint64_t shape_hash =
        random::mix64(static_cast<std::uint64_t>(a.rows()) * 0x100000001b3ULL +
                      static_cast<std::uint64_t>(a.cols()));
    const Eigen::Index n = a.cols();
    const Eigen::Index b = std::min(kPowerBlock, n);
    const PowerRun first = power_run(a, start_block(n, b, shape_hash, opt.seed, 0), opt);
    if (first.converged) {
        return first.estimate;
    }
    // Restart from directions orthogonal to the stalled leading Ritz vector.
    Matrix w = start_block(n, b, shape_hash, opt.seed, 1);
    if (first.direction.size() == n) {
        const Vector u = first.direction.normalized();
        w -= u * (u.transpose() * w);
    }
    const PowerRun second = power_run(a, w, opt);
    const double best = std::max(first.estimate, second.estimate);
    if (!second.converged) {
        throw ConvergenceFailure("power iteration did not converge after restart", best);
    }
    return best;
}

}  // namespace

double operator_norm(const Matrix& a, NormMethod method, const PowerOptions& options) {
    check_finite(a);
    if (a.size() == 0 || a.cwiseAbs().maxCoeff() == 0.0) {
        return 0.0;
    }
    if (method == NormMethod::automatic) {
        method = std::max(a.rows(), a.cols()) <= 512 ? NormMethod::exact : NormMethod::power;
    }
    if (method == NormMethod::power) {
        return power_norm(a, options);
    }
    Eigen::BDCSVD<Matrix> svd(a);
    return svd.singularValues()(0);
}

double effective_rank(const SymMatrix& a) {
    if (a.matrix().cwiseAbs().maxCoeff() == 0.0) {
        throw ZeroCovariance("effective rank of the zero matrix is undefined");
    }
    const EigenDecomp eig = sym_eigen(a);
    require_psd(eig, kPsdRelTol, "effective_rank");
    const double top = eig.eigenvalues(0);
    if (top <= 0.0) {
        throw ZeroCovariance("effective rank requires a nonzero PSD matrix");
    }
    return a.trace() / top;
}

}  // namespace crosscov::matops
