#include "sticky/nash.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "picard.hpp"
#include "sticky/error.hpp"
#include "sticky/kernels.hpp"

namespace sticky {

RiccatiRoot riccati_root(const MarketParams& m, double b) {
    if (!(b > 0.0)) throw Error(ErrorCode::InvalidPopulation, "gain must be > 0");
    const double g = b * b / m.r;
    const double roots[2] = {0.0, -m.r * (m.rho + 2.0 * m.mu) / (b * b)};
    auto margin = [&](double k) { return -m.mu - g * k - m.rho / 2.0; };
    int passing = 0;
    int chosen = -1;
    for (int i = 0; i < 2; ++i) {
        if (margin(roots[i]) < 0.0) {
            ++passing;
            chosen = i;
        }
    }
    if (passing != 1) {
        throw Error(ErrorCode::InternalError, "Riccati stability filter did not isolate one root");
    }
    RiccatiRoot out;
    out.selected = roots[chosen];
    out.rejected = roots[1 - chosen];
    out.selected_margin = margin(out.selected);
    out.rejected_margin = margin(out.rejected);
    return out;
}

double FixedPointOptions::horizon(const MarketParams& m) const {
    if (t_max > 0.0) return t_max;
    return std::max(50.0, 20.0 / std::min({m.alpha, m.mu, m.rho}));
}

std::size_t FixedPointOptions::nodes(const MarketParams& m) const {
    return static_cast<std::size_t>(std::ceil(horizon(m) / dt - 1e-9)) + 1;
}

Eigen::Matrix3d nash_matrix(const MarketParams& m, double m2) {
    Eigen::Matrix3d a;
    a << -m.alpha, -m.alpha, 0.0,
         0.0, -m.mu, -m2 / m.r,
         0.5, 0.0, m.rho + m.mu;
    return a;
}

Eigen::Vector3d nash_offset(const MarketParams& m) { return {m.alpha * m.beta, 0.0, -m.c / 2.0}; }

Eigen::Vector3d nash_steady_state_closed_form(const MarketParams& m, double m2) {
    const double d = 2.0 * m.r * m.mu * (m.rho + m.mu) + m2;
    return {(2.0 * m.r * m.beta * m.mu * (m.rho + m.mu) + m2 * m.c) / d, m2 * (m.beta - m.c) / d,
            m.r * m.mu * (m.c - m.beta) / d};
}

double nash_contraction_bound(const MarketParams& m, double m2) {
    return m2 / (2.0 * m.r * m.mu * (m.rho + m.mu));
}

namespace {

Eigen::Vector3d solve_steady_state(const MarketParams& m, double m2) {
    const Eigen::Matrix3d a = nash_matrix(m, m2);
    const Eigen::Vector3d z = a.fullPivLu().solve(-nash_offset(m));
    const Eigen::Vector3d closed = nash_steady_state_closed_form(m, m2);
    if ((a * z + nash_offset(m)).norm() > 1e-9 * std::max(1.0, z.norm()) ||
        (z - closed).norm() > 1e-9 * std::max(1.0, closed.norm())) {
        throw Error(ErrorCode::InternalError, "Nash steady state disagrees with its closed form");
    }
    return z;
}

double population_cost(const NashLimit& lim, const Mixture& dist, double q0, bool exact) {
    double j = 0.0;
    for (const auto& a : dist) {
        j += a.weight * (exact ? nash_cost_closed_form(lim, a.theta, q0).value : nash_cost_quadrature(lim, a.theta, q0));
    }
    return j;
}

}  // namespace

NashLimit solve_uniform(const MarketParams& params, double b, const InitialConditions& init) {
    if (!(b > 0.0)) throw Error(ErrorCode::InvalidPopulation, "gain must be > 0");
    return solve_spectral(params, {{b, 1.0}}, init);
}

NashLimit solve_spectral(const MarketParams& params, const Mixture& dist_in, const InitialConditions& init) {
    const MarketParams m = validate_params(params);
    validate_initial(init);
    const Mixture dist = normalize_mixture(dist_in);
    const double m2 = second_moment(dist);

    NashLimit out;
    out.params = m;
    out.dist = dist;
    out.init = init;
    out.z = solve_steady_state(m, m2);
    out.contraction_bound = nash_contraction_bound(m, m2);
    out.t_max = FixedPointOptions{}.horizon(m);

    const Eigen::Matrix3d a = nash_matrix(m, m2);
    out.routh = routh_count(char_poly(a));
    out.spectral = eigendecompose(a);
    if (out.routh->stable_count != 2 || out.spectral->stable_count != 2) {
        std::ostringstream os;
        os << "expected 2 stable roots, Routh gives " << out.routh->stable_count << ", eigenvalues give "
           << out.spectral->stable_count;
        throw Error(ErrorCode::InternalError, os.str());
    }
    const auto vectors = out.spectral->stable_vectors();
    const int selector[2] = {0, 1};
    const Eigen::Vector2d target(init.p0 - out.z[0], init.q0_mean - out.z[1]);
    out.a_coeffs = boundary_solve(vectors, selector, target);

    ModalTrajectory modal;
    modal.z = out.z;
    modal.coeffs = out.a_coeffs;
    modal.rates = out.spectral->stable_values();
    modal.vectors = vectors;
    out.imag_residue = modal.imag_residue(out.t_max);
    if (out.imag_residue > 1e-9) {
        throw Error(ErrorCode::InternalError, "spectral trajectory has a non-negligible imaginary part");
    }
    out.p = ScalarPath(modal.component(0));
    out.q = ScalarPath(modal.component(1));
    out.s = ScalarPath(modal.component(2));
    if (dist.size() == 1) {
        out.q_theta = {out.q};
    } else {
        const double h = FixedPointOptions{}.dt;
        const std::size_t n = FixedPointOptions{}.nodes(m);
        const std::vector<double> s = out.s.sample(h, n);
        std::vector<double> f(n);
        for (const auto& a : dist) {
            const double g = a.theta * a.theta / m.r;
            for (std::size_t k = 0; k < n; ++k) f[k] = -g * s[k];
            out.q_theta.emplace_back(
                SampledPath{h, kernels::forward_convolve(f, m.mu, h, init.q0_mean), -g * out.z[2] / m.mu});
        }
    }
    out.modal = std::move(modal);
    out.j_nash_inf = population_cost(out, dist, init.q0_mean, true);
    return out;
}

NashIterate nash_map(const MarketParams& m, const Mixture& dist, const InitialConditions& init,
                     const Eigen::Vector3d& z, double h, std::span<const double> qbar) {
    const std::size_t n = qbar.size();
    NashIterate it;
    std::vector<double> f(n);
    for (std::size_t k = 0; k < n; ++k) f[k] = m.alpha * (m.beta - qbar[k]);
    it.p = kernels::forward_convolve(f, m.alpha, h, init.p0);
    for (std::size_t k = 0; k < n; ++k) f[k] = (m.c - it.p[k]) / 2.0;
    it.s = kernels::backward_bounded(f, m.rho + m.mu, h, z[2]);
    it.qbar.assign(n, 0.0);
    for (const auto& a : dist) {
        const double g = a.theta * a.theta / m.r;
        for (std::size_t k = 0; k < n; ++k) f[k] = -g * it.s[k];
        auto qt = kernels::forward_convolve(f, m.mu, h, init.q0_mean);
        for (std::size_t k = 0; k < n; ++k) it.qbar[k] += a.weight * qt[k];
        it.q_theta.push_back(std::move(qt));
    }
    return it;
}

NashLimit solve_fixedpoint(const MarketParams& params, const Mixture& dist_in, const InitialConditions& init,
                           const FixedPointOptions& opt) {
    const MarketParams m = validate_params(params);
    validate_initial(init);
    const Mixture dist = normalize_mixture(dist_in);
    const double m2 = second_moment(dist);

    NashLimit out;
    out.params = m;
    out.dist = dist;
    out.init = init;
    out.z = solve_steady_state(m, m2);
    out.contraction_bound = nash_contraction_bound(m, m2);
    out.t_max = opt.horizon(m);
    const std::size_t n = opt.nodes(m);
    const double h = opt.dt;

    std::vector<double> start = opt.initial_qbar;
    if (start.size() != n) {
        start.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            const double e = std::exp(-m.mu * h * static_cast<double>(k));
            start[k] = init.q0_mean * e + out.z[1] * (1.0 - e);
        }
    }
    auto map = [&](const std::vector<double>& q) { return nash_map(m, dist, init, out.z, h, q).qbar; };
    auto result = detail::picard(map, start, opt, "Nash");
    const NashIterate fin = nash_map(m, dist, init, out.z, h, result.q);

    out.p = ScalarPath(SampledPath{h, fin.p, out.z[0]});
    out.q = ScalarPath(SampledPath{h, fin.qbar, out.z[1]});
    out.s = ScalarPath(SampledPath{h, fin.s, out.z[2]});
    for (std::size_t i = 0; i < dist.size(); ++i) {
        const double tail = -dist[i].theta * dist[i].theta * out.z[2] / (m.r * m.mu);
        out.q_theta.emplace_back(SampledPath{h, fin.q_theta[i], tail});
    }
    out.fixed_point = std::move(result.report);
    out.j_nash_inf = population_cost(out, dist, init.q0_mean, false);
    return out;
}

NashCost nash_cost_closed_form(const NashLimit& lim, double b, double q0) {
    const ExpSum* s = lim.s.exact();
    if (s == nullptr) {
        throw Error(ErrorCode::InternalError, "closed-form cost needs the exponential-sum solution");
    }
    const double rho = lim.params.rho;
    const cplx integral = discounted_product(*s, *s, rho);
    NashCost c;
    c.linear_term = 2.0 * (*s)(0.0) * q0;
    c.g0_unweighted = -integral.real();
    c.g0 = -(b * b / lim.params.r) * integral.real();
    c.value = c.linear_term + c.g0;
    c.imag_residue = std::abs(integral.imag()) * b * b / lim.params.r;
    c.quadrature_value = nash_cost_quadrature(lim, b, q0);
    if (c.imag_residue > 1e-9 || std::abs(c.value - c.quadrature_value) > 1e-6 * std::max(1.0, std::abs(c.value))) {
        std::ostringstream os;
        os << "closed-form Nash cost " << c.value << " disagrees with quadrature " << c.quadrature_value;
        throw Error(ErrorCode::InternalError, os.str());
    }
    return c;
}

double nash_cost_quadrature(const NashLimit& lim, double b, double q0) {
    return 2.0 * lim.s(0.0) * q0 - (b * b / lim.params.r) * discounted_quadrature(lim.s, lim.s, lim.params.rho);
}

ScalarPath strategy_nash(const NashLimit& limit, double b_i) { return limit.s.scaled(-b_i / limit.params.r); }

}  // namespace sticky
