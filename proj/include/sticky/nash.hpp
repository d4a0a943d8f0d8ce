#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "sticky/model.hpp"
#include "sticky/spectral.hpp"
#include "sticky/trajectory.hpp"

namespace sticky {

struct RiccatiRoot {
    double selected = 0.0;
    double rejected = 0.0;
    double selected_margin = 0.0;  ///< -mu - (b^2/r) k - rho/2 at the selected root
    double rejected_margin = 0.0;
};

/// Both roots of rho k = -2 mu k - (b^2/r) k^2 and the one passing the
/// discounted stability filter.
RiccatiRoot riccati_root(const MarketParams& params, double b);

struct FixedPointOptions {
    double t_max = 0.0;  ///< 0 selects max(50, 20 / min(alpha, mu, rho))
    double dt = 5e-3;
    double tol = 1e-8;
    int max_iters = 500;
    double damping = 1.0;
    bool retry_damped = true;
    /// Optional starting q-bar on the grid; default relaxes q0 to the steady state.
    std::vector<double> initial_qbar;

    [[nodiscard]] double horizon(const MarketParams& m) const;
    [[nodiscard]] std::size_t nodes(const MarketParams& m) const;
};

struct FixedPointReport {
    bool converged = false;
    int iterations = 0;
    double damping = 1.0;
    double final_change = 0.0;
    std::vector<double> change_history;
};

struct NashLimit {
    MarketParams params;
    Mixture dist;
    InitialConditions init;
    Eigen::Vector3d z = Eigen::Vector3d::Zero();  ///< (p, q, s) steady state

    std::optional<SpectralData> spectral;
    std::optional<RouthVerdict> routh;
    std::vector<cplx> a_coeffs;
    std::optional<ModalTrajectory> modal;
    double imag_residue = 0.0;

    ScalarPath p;
    ScalarPath q;
    ScalarPath s;
    std::vector<ScalarPath> q_theta;  ///< one per atom of dist

    double contraction_bound = 0.0;
    double t_max = 0.0;
    double j_nash_inf = 0.0;  ///< population average of the per-type cost
    std::optional<FixedPointReport> fixed_point;
};

Eigen::Matrix3d nash_matrix(const MarketParams& m, double second_moment);
Eigen::Vector3d nash_offset(const MarketParams& m);
/// Closed-form steady state with b^2 replaced by the second moment.
Eigen::Vector3d nash_steady_state_closed_form(const MarketParams& m, double second_moment);
/// m2 / (2 r mu (rho + mu)).
double nash_contraction_bound(const MarketParams& m, double second_moment);

NashLimit solve_uniform(const MarketParams& params, double b, const InitialConditions& init);
/// Spectral route for any finite mixture: the aggregate system depends on the
/// gains only through their second moment.
NashLimit solve_spectral(const MarketParams& params, const Mixture& dist, const InitialConditions& init);

struct NashIterate {
    std::vector<double> p;
    std::vector<double> s;
    std::vector<std::vector<double>> q_theta;
    std::vector<double> qbar;
};

/// One application of the consistency map to a sampled q-bar.
NashIterate nash_map(const MarketParams& m, const Mixture& dist, const InitialConditions& init,
                     const Eigen::Vector3d& z, double h, std::span<const double> qbar);

NashLimit solve_fixedpoint(const MarketParams& params, const Mixture& dist, const InitialConditions& init,
                           const FixedPointOptions& options = {});

struct NashCost {
    double value = 0.0;            ///< 2 s(0) q0 + g(0)
    double linear_term = 0.0;      ///< 2 s(0) q0
    double g0 = 0.0;               ///< -(b^2/r) int e^{-rho t} s^2
    double g0_unweighted = 0.0;    ///< -int e^{-rho t} s^2
    double imag_residue = 0.0;
    double quadrature_value = 0.0;
};

/// Six-term expansion over the exponential-sum form of s, cross-checked
/// against adaptive quadrature. Throws INTERNAL_ERROR if the routes disagree.
NashCost nash_cost_closed_form(const NashLimit& limit, double b, double q0_mean);

/// Same cost by quadrature of the stored s path (any representation).
double nash_cost_quadrature(const NashLimit& limit, double b, double q0_mean);

/// u_i(t) = -(b_i / r) s(t).
ScalarPath strategy_nash(const NashLimit& limit, double b_i);

}  // namespace sticky
