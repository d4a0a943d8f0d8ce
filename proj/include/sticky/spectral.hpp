#pragma once

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace sticky {

using cplx = std::complex<double>;

/// Coefficients of det(lambda I - M), highest degree first, leading 1.
/// Faddeev-LeVerrier; n <= 8.
std::vector<double> char_poly(const Eigen::MatrixXd& m);

/// Evaluates a polynomial (highest degree first) at z.
cplx poly_eval(std::span<const double> coeffs, cplx z);

struct RouthVerdict {
    std::vector<double> first_column;
    int sign_changes = 0;
    int unstable_count = 0;
    int stable_count = 0;
};

/// Right-half-plane root count from the first column of the Routh array.
/// A zero pivot is replaced by a small epsilon; a vanishing row throws
/// IMAGINARY_AXIS_ROOT.
RouthVerdict routh_count(std::span<const double> coeffs);

/// Roots of a real polynomial: eigenvalues of the companion matrix, then
/// Newton polish on the polynomial itself.
std::vector<cplx> polynomial_roots(std::span<const double> coeffs);

struct SpectralTolerances {
    double residual = 1e-9;  ///< relative to ||M||
    double gap = 1e-7;       ///< relative to max(1, ||M||)
};

struct SpectralData {
    Eigen::MatrixXd matrix;
    std::vector<cplx> eigenvalues;             ///< sorted by (Re, Im) ascending
    std::vector<Eigen::VectorXcd> eigenvectors;  ///< unit norm, first nonzero entry real positive
    int stable_count = 0;

    /// Indices of eigenvalues with negative real part, in sorted order.
    [[nodiscard]] std::vector<std::size_t> stable_indices() const;
    [[nodiscard]] std::vector<Eigen::VectorXcd> stable_vectors() const;
    [[nodiscard]] std::vector<cplx> stable_values() const;
    [[nodiscard]] double max_residual() const;
};

SpectralData eigendecompose(const Eigen::MatrixXd& m, SpectralTolerances tol = {});

/// Scales v to unit norm with its first entry above `floor` real positive.
Eigen::VectorXcd normalize_eigenvector(const Eigen::VectorXcd& v, double floor = 1e-10);

/// Coefficients a with sum_i a_i v_i[selector] = target. Throws
/// SINGULAR_BOUNDARY when the restricted vectors are dependent. Conjugate
/// vector pairs receive conjugate coefficients.
std::vector<cplx> boundary_solve(std::span<const Eigen::VectorXcd> vectors, std::span<const int> selector,
                                 const Eigen::VectorXd& target, double tol = 1e-9);

}  // namespace sticky
