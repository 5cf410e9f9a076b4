#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace testing_support {

// Test-side generators use std:: facilities only, so they do not share
// code with the library's samplers.
inline Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = g(rng);
    return m;
}

inline Eigen::MatrixXd random_symmetric(Eigen::Index d, std::uint64_t seed) {
    Eigen::MatrixXd a = gaussian_matrix(d, d, seed);
    return 0.5 * (a + a.transpose());
}

// PSD with the given rank (rank <= d).
inline Eigen::MatrixXd random_psd(Eigen::Index d, Eigen::Index rank, std::uint64_t seed) {
    Eigen::MatrixXd b = gaussian_matrix(d, rank, seed);
    Eigen::MatrixXd a = b * b.transpose();
    return 0.5 * (a + a.transpose());
}

inline Eigen::MatrixXd random_orthogonal(Eigen::Index d, std::uint64_t seed) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian_matrix(d, d, seed));
    return qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
}

inline double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace testing_support
