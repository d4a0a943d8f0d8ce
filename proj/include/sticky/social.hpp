#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "sticky/model.hpp"
#include "sticky/nash.hpp"
#include "sticky/spectral.hpp"
#include "sticky/trajectory.hpp"

namespace sticky {

using Vector5d = Eigen::Matrix<double, 5, 1>;
using Matrix5d = Eigen::Matrix<double, 5, 5>;

/// State ordering (p, s1, s2, y1, y2); y1 is aggregate output and y2 the
/// filtered output v.
struct SocialLimit {
    MarketParams params;
    Mixture dist;
    InitialConditions init;
    Vector5d z_s = Vector5d::Zero();

    std::optional<SpectralData> spectral;
    std::optional<RouthVerdict> routh;
    std::vector<cplx> a_coeffs;
    std::optional<ModalTrajectory> modal;
    double imag_residue = 0.0;

    ScalarPath p;
    ScalarPath s1;
    ScalarPath s2;
    ScalarPath q;  ///< sum_k w_k y_{theta_k, 1}
    ScalarPath v;  ///< sum_k w_k y_{theta_k, 2}
    std::vector<ScalarPath> y1_theta;
    std::vector<ScalarPath> y2_theta;
    /// sup |v - (-alpha int_0^t e^{-alpha(t-tau)} q dtau)| on the grid.
    double v_convolution_gap = 0.0;

    double t_max = 0.0;
    double j_soc_inf = 0.0;
    std::optional<FixedPointReport> fixed_point;
};

Matrix5d social_matrix(const MarketParams& m, double second_moment);
Vector5d social_offset(const MarketParams& m);
/// Coefficients of the quartic cofactor of (lambda + alpha) in the
/// characteristic polynomial, highest degree first.
std::vector<double> social_quartic(const MarketParams& m, double second_moment);

SocialLimit solve_social_uniform(const MarketParams& params, double b, const InitialConditions& init);
SocialLimit solve_social_spectral(const MarketParams& params, const Mixture& dist, const InitialConditions& init);

struct SocialIterate {
    std::vector<double> p;
    std::vector<double> s1;
    std::vector<double> s2;
    std::vector<std::vector<double>> y1_theta;
    std::vector<std::vector<double>> y2_theta;
    std::vector<double> qbar;
    std::vector<double> vbar;
};

SocialIterate social_map(const MarketParams& m, const Mixture& dist, const InitialConditions& init,
                         const Vector5d& z_s, double h, std::span<const double> qbar);

SocialLimit solve_social_fixedpoint(const MarketParams& params, const Mixture& dist, const InitialConditions& init,
                                    const FixedPointOptions& options = {});

struct SocialCost {
    double value = 0.0;
    double linear_term = 0.0;    ///< 2 s1(0) q0
    double g_term = 0.0;         ///< -(m2/r) int e^{-rho t} s1^2
    double qv_term = 0.0;        ///< int e^{-rho t} q v
    double imag_residue = 0.0;
    double quadrature_value = 0.0;
};

/// Term-by-term evaluation over the exponential-sum solution, cross-checked
/// against adaptive quadrature.
SocialCost social_cost_closed_form(const SocialLimit& limit, double q0_mean);
double social_cost_quadrature(const SocialLimit& limit, double q0_mean);

/// u_i(t) = -(b_i / r) s1(t).
ScalarPath strategy_social(const SocialLimit& limit, double b_i);

}  // namespace sticky
