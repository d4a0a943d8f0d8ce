#pragma once

#include <complex>
#include <memory>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace sticky {

using cplx = std::complex<double>;

/// f(t) = constant + sum_i coeffs[i] * exp(rates[i] * t).
struct ExpSum {
    double constant = 0.0;
    std::vector<cplx> coeffs;
    std::vector<cplx> rates;

    [[nodiscard]] cplx eval_complex(double t) const;
    [[nodiscard]] double operator()(double t) const { return eval_complex(t).real(); }
    [[nodiscard]] double derivative(double t) const;
    [[nodiscard]] ExpSum scaled(double k) const;
};

/// Exact integral of exp(-rho t) f(t) g(t) over [0, inf). Requires
/// rho > Re(lambda_i + lambda_j) for every pair of rates.
cplx discounted_product(const ExpSum& f, const ExpSum& g, double rho);

/// z + sum_i a_i exp(lambda_i t) xi_i.
struct ModalTrajectory {
    Eigen::VectorXd z;
    std::vector<cplx> coeffs;
    std::vector<cplx> rates;
    std::vector<Eigen::VectorXcd> vectors;

    [[nodiscard]] Eigen::VectorXcd eval_complex(double t) const;
    [[nodiscard]] Eigen::VectorXd operator()(double t) const { return eval_complex(t).real(); }
    [[nodiscard]] ExpSum component(Eigen::Index k) const;
    /// Largest |Im| over components and over an even grid of [0, t_end].
    [[nodiscard]] double imag_residue(double t_end, int samples = 501) const;
};

/// Values on a uniform grid t_k = k h, linearly interpolated; constant at
/// `tail` beyond the last node.
struct SampledPath {
    double h = 0.0;
    std::vector<double> values;
    double tail = 0.0;

    [[nodiscard]] double operator()(double t) const;
    [[nodiscard]] double t_end() const { return h * static_cast<double>(values.size() - 1); }
};

/// A scalar trajectory on [0, inf): exact exponential sum or sampled grid.
class ScalarPath {
public:
    ScalarPath() = default;
    explicit ScalarPath(ExpSum e) : repr_(std::move(e)) {}
    explicit ScalarPath(SampledPath s) : repr_(std::move(s)) {}

    [[nodiscard]] double operator()(double t) const;
    [[nodiscard]] ScalarPath scaled(double k) const;
    [[nodiscard]] bool is_exact() const noexcept { return std::holds_alternative<ExpSum>(repr_); }
    [[nodiscard]] const ExpSum* exact() const noexcept { return std::get_if<ExpSum>(&repr_); }
    [[nodiscard]] const SampledPath* sampled() const noexcept { return std::get_if<SampledPath>(&repr_); }
    /// Values at t_k = k h for k = 0..n-1.
    [[nodiscard]] std::vector<double> sample(double h, std::size_t n) const;

private:
    std::variant<std::monostate, ExpSum, SampledPath> repr_;
};

/// Integral of exp(-rho t) f(t) g(t) over [0, inf) by adaptive
/// Gauss-Kronrod on a mapped infinite interval.
double discounted_quadrature(const ScalarPath& f, const ScalarPath& g, double rho, double rel_tol = 1e-12);

}  // namespace sticky
