#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace crosscov::matops {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dense symmetric matrix. Construction validates finiteness and
/// symmetry: |a_ij - a_ji| <= 1e-12 * (1 + max|a|).
class SymMatrix {
public:
    /// Throws InvalidMatrix on empty, non-square, non-finite or
    /// asymmetric input.
    explicit SymMatrix(Matrix entries);

    /// Averages `m` with its transpose first; for products such as
    /// L * S * L^T whose symmetry only holds up to roundoff.
    static SymMatrix symmetrized(const Matrix& m);
    static SymMatrix identity(Eigen::Index dim);
    static SymMatrix diagonal(const Vector& diag);
    static SymMatrix zero(Eigen::Index dim);

    Eigen::Index dim() const noexcept { return entries_.rows(); }
    const Matrix& matrix() const noexcept { return entries_; }
    double operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }
    double trace() const { return entries_.trace(); }

private:
    struct Unchecked {};
    SymMatrix(Matrix entries, Unchecked) : entries_(std::move(entries)) {}

    Matrix entries_;
};

/// Eigenvalues sorted descending with matching orthonormal columns.
struct EigenDecomp {
    Vector eigenvalues;
    Matrix eigenvectors;

    /// V diag(f(lambda)) V^T.
    template <typename F>
    Matrix reconstruct(F&& f) const {
        Vector mapped = eigenvalues.unaryExpr(f);
        return eigenvectors * mapped.asDiagonal() * eigenvectors.transpose();
    }
};

EigenDecomp sym_eigen(const SymMatrix& a);

/// Relative tolerance below which eigenvalues count as zero / roundoff.
inline constexpr double kPsdRelTol = 1e-10;

/// Symmetric PSD square root. Eigenvalues in [-1e-10 * lambda_max, 0)
/// are clipped to zero, as are positive ones below d * eps * lambda_max;
/// anything more negative throws NotPSD.
SymMatrix psd_sqrt(const SymMatrix& a);
SymMatrix psd_sqrt(const EigenDecomp& eig);

/// Moore-Penrose pseudoinverse of a PSD matrix. Eigenvalues at or below
/// rel_tol * lambda_max are treated as exact zeros. The zero matrix maps
/// to the zero matrix.
SymMatrix pseudo_inverse(const SymMatrix& a, double rel_tol = kPsdRelTol);

enum class NormMethod {
    exact,  // largest singular value from a full SVD
    power,  // block power iteration on x -> A^T (A x)
    automatic,  // exact up to 512 rows/cols, power above
};

struct PowerOptions {
    double rel_tol = 1e-9;
    int max_iterations = 1000;
    std::uint64_t seed = 0;
};

/// Largest singular value of a rectangular matrix.
/// The power route throws ConvergenceFailure (with its best estimate)
/// if neither the initial run nor the single restart converges.
double operator_norm(const Matrix& a, NormMethod method = NormMethod::automatic,
                     const PowerOptions& options = {});

/// tr(A) / ||A||. Throws ZeroCovariance for the zero matrix and NotPSD
/// for matrices with significantly negative eigenvalues.
double effective_rank(const SymMatrix& a);

/// Smallest eigenvalue check used by every PSD precondition.
void require_psd(const EigenDecomp& eig, double rel_tol, const char* what);

}  // namespace crosscov::matops
