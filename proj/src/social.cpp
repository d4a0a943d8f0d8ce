#include "sticky/social.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "picard.hpp"
#include "sticky/error.hpp"
#include "sticky/kernels.hpp"

namespace sticky {

Matrix5d social_matrix(const MarketParams& m, double m2) {
    const double a = m.alpha;
    Matrix5d ms;
    ms << -a, 0.0, 0.0, -a, 0.0,
          0.5, m.rho + m.mu, a, 0.0, 0.0,
          0.0, 0.0, m.rho + a, 0.5, 0.0,
          0.0, -m2 / m.r, 0.0, -m.mu, 0.0,
          0.0, 0.0, 0.0, -a, -a;
    return ms;
}

Vector5d social_offset(const MarketParams& m) {
    Vector5d b;
    b << m.alpha * m.beta, -m.c / 2.0, 0.0, 0.0, 0.0;
    return b;
}

std::vector<double> social_quartic(const MarketParams& m, double m2) {
    const double a = m.alpha;
    const double mu = m.mu;
    const double rho = m.rho;
    return {1.0,
            -2.0 * rho,
            rho * rho - (a + mu) * rho - a * a - mu * mu,
            rho * ((a + mu) * rho + a * a + mu * mu),
            a * mu * (rho + a) * (rho + mu) + a * m2 / (2.0 * m.r) * (rho + 2.0 * a)};
}

namespace {

Vector5d solve_steady_state(const MarketParams& m, double m2) {
    const Matrix5d ms = social_matrix(m, m2);
    const Vector5d z = ms.fullPivLu().solve(-social_offset(m));
    if ((ms * z + social_offset(m)).norm() > 1e-9 * std::max(1.0, z.norm())) {
        throw Error(ErrorCode::InternalError, "social steady state residual too large");
    }
    return z;
}

double convolution_gap(const MarketParams& m, double h, const std::vector<double>& q, const std::vector<double>& v) {
    std::vector<double> f(q.size());
    for (std::size_t k = 0; k < q.size(); ++k) f[k] = -m.alpha * q[k];
    const auto conv = kernels::forward_convolve(f, m.alpha, h, 0.0);
    double gap = 0.0;
    for (std::size_t k = 0; k < q.size(); ++k) gap = std::max(gap, std::abs(conv[k] - v[k]));
    return gap;
}

}  // namespace

SocialLimit solve_social_uniform(const MarketParams& params, double b, const InitialConditions& init) {
    if (!(b > 0.0)) throw Error(ErrorCode::InvalidPopulation, "gain must be > 0");
    return solve_social_spectral(params, {{b, 1.0}}, init);
}

SocialLimit solve_social_spectral(const MarketParams& params, const Mixture& dist_in, const InitialConditions& init) {
    const MarketParams m = validate_params(params);
    validate_initial(init);
    const Mixture dist = normalize_mixture(dist_in);
    const double m2 = second_moment(dist);

    SocialLimit out;
    out.params = m;
    out.dist = dist;
    out.init = init;
    out.z_s = solve_steady_state(m, m2);
    out.t_max = FixedPointOptions{}.horizon(m);

    const Matrix5d ms = social_matrix(m, m2);
    out.routh = routh_count(char_poly(ms));
    out.spectral = eigendecompose(ms);
    if (out.routh->stable_count != 3 || out.spectral->stable_count != 3) {
        std::ostringstream os;
        os << "expected 3 stable roots, Routh gives " << out.routh->stable_count << ", eigenvalues give "
           << out.spectral->stable_count;
        throw Error(ErrorCode::InternalError, os.str());
    }
    const auto values = out.spectral->stable_values();
    const auto vectors = out.spectral->stable_vectors();
    bool found_alpha = false;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (std::abs(values[i] + m.alpha) < 1e-9 * std::max(1.0, m.alpha)) {
            const double off = vectors[i].head<4>().norm();
            if (off < 1e-9) found_alpha = true;
        }
    }
    if (!found_alpha) {
        throw Error(ErrorCode::InternalError, "-alpha with eigenvector e5 missing from the social spectrum");
    }

    const int selector[3] = {0, 3, 4};
    Eigen::Vector3d target(init.p0 - out.z_s[0], init.q0_mean - out.z_s[3], -out.z_s[4]);
    out.a_coeffs = boundary_solve(vectors, selector, target);

    ModalTrajectory modal;
    modal.z = out.z_s;
    modal.coeffs = out.a_coeffs;
    modal.rates = values;
    modal.vectors = vectors;
    out.imag_residue = modal.imag_residue(out.t_max);
    if (out.imag_residue > 1e-9) {
        throw Error(ErrorCode::InternalError, "spectral trajectory has a non-negligible imaginary part");
    }
    out.p = ScalarPath(modal.component(0));
    out.s1 = ScalarPath(modal.component(1));
    out.s2 = ScalarPath(modal.component(2));
    out.q = ScalarPath(modal.component(3));
    out.v = ScalarPath(modal.component(4));
    if (dist.size() == 1) {
        out.y1_theta = {out.q};
        out.y2_theta = {out.v};
    } else {
        const double h = FixedPointOptions{}.dt;
        const std::size_t n = FixedPointOptions{}.nodes(m);
        const std::vector<double> s1 = out.s1.sample(h, n);
        std::vector<double> f(n);
        for (const auto& a : dist) {
            const double g = a.theta * a.theta / m.r;
            for (std::size_t k = 0; k < n; ++k) f[k] = -g * s1[k];
            auto y1 = kernels::forward_convolve(f, m.mu, h, init.q0_mean);
            for (std::size_t k = 0; k < n; ++k) f[k] = -m.alpha * y1[k];
            auto y2 = kernels::forward_convolve(f, m.alpha, h, 0.0);
            const double tail = -g * out.z_s[1] / m.mu;
            out.y1_theta.emplace_back(SampledPath{h, std::move(y1), tail});
            out.y2_theta.emplace_back(SampledPath{h, std::move(y2), -tail});
        }
    }
    out.modal = std::move(modal);

    const double h = 1e-3;
    const auto n = static_cast<std::size_t>(std::llround(50.0 / h)) + 1;
    out.v_convolution_gap = convolution_gap(m, h, out.q.sample(h, n), out.v.sample(h, n));
    out.j_soc_inf = social_cost_closed_form(out, init.q0_mean).value;
    return out;
}

SocialIterate social_map(const MarketParams& m, const Mixture& dist, const InitialConditions& init,
                         const Vector5d& z_s, double h, std::span<const double> qbar) {
    const std::size_t n = qbar.size();
    SocialIterate it;
    std::vector<double> f(n);
    for (std::size_t k = 0; k < n; ++k) f[k] = m.alpha * (m.beta - qbar[k]);
    it.p = kernels::forward_convolve(f, m.alpha, h, init.p0);
    for (std::size_t k = 0; k < n; ++k) f[k] = -qbar[k] / 2.0;
    it.s2 = kernels::backward_bounded(f, m.rho + m.alpha, h, z_s[2]);
    for (std::size_t k = 0; k < n; ++k) f[k] = (m.c - it.p[k]) / 2.0 - m.alpha * it.s2[k];
    it.s1 = kernels::backward_bounded(f, m.rho + m.mu, h, z_s[1]);
    it.qbar.assign(n, 0.0);
    it.vbar.assign(n, 0.0);
    for (const auto& a : dist) {
        const double g = a.theta * a.theta / m.r;
        for (std::size_t k = 0; k < n; ++k) f[k] = -g * it.s1[k];
        auto y1 = kernels::forward_convolve(f, m.mu, h, init.q0_mean);
        for (std::size_t k = 0; k < n; ++k) f[k] = -m.alpha * y1[k];
        auto y2 = kernels::forward_convolve(f, m.alpha, h, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            it.qbar[k] += a.weight * y1[k];
            it.vbar[k] += a.weight * y2[k];
        }
        it.y1_theta.push_back(std::move(y1));
        it.y2_theta.push_back(std::move(y2));
    }
    return it;
}

SocialLimit solve_social_fixedpoint(const MarketParams& params, const Mixture& dist_in, const InitialConditions& init,
                                    const FixedPointOptions& opt) {
    const MarketParams m = validate_params(params);
    validate_initial(init);
    const Mixture dist = normalize_mixture(dist_in);
    const double m2 = second_moment(dist);

    SocialLimit out;
    out.params = m;
    out.dist = dist;
    out.init = init;
    out.z_s = solve_steady_state(m, m2);
    out.t_max = opt.horizon(m);
    const std::size_t n = opt.nodes(m);
    const double h = opt.dt;

    std::vector<double> start = opt.initial_qbar;
    if (start.size() != n) {
        start.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            const double e = std::exp(-m.mu * h * static_cast<double>(k));
            start[k] = init.q0_mean * e + out.z_s[3] * (1.0 - e);
        }
    }
    auto map = [&](const std::vector<double>& q) { return social_map(m, dist, init, out.z_s, h, q).qbar; };
    auto result = detail::picard(map, start, opt, "social");
    const SocialIterate fin = social_map(m, dist, init, out.z_s, h, result.q);

    out.p = ScalarPath(SampledPath{h, fin.p, out.z_s[0]});
    out.s1 = ScalarPath(SampledPath{h, fin.s1, out.z_s[1]});
    out.s2 = ScalarPath(SampledPath{h, fin.s2, out.z_s[2]});
    out.q = ScalarPath(SampledPath{h, fin.qbar, out.z_s[3]});
    out.v = ScalarPath(SampledPath{h, fin.vbar, out.z_s[4]});
    for (std::size_t i = 0; i < dist.size(); ++i) {
        const double y1_tail = -dist[i].theta * dist[i].theta * out.z_s[1] / (m.r * m.mu);
        out.y1_theta.emplace_back(SampledPath{h, fin.y1_theta[i], y1_tail});
        out.y2_theta.emplace_back(SampledPath{h, fin.y2_theta[i], -y1_tail});
    }
    out.v_convolution_gap = convolution_gap(m, h, fin.qbar, fin.vbar);
    out.fixed_point = std::move(result.report);
    out.j_soc_inf = social_cost_quadrature(out, init.q0_mean);
    return out;
}

SocialCost social_cost_closed_form(const SocialLimit& lim, double q0) {
    const ExpSum* s1 = lim.s1.exact();
    const ExpSum* q = lim.q.exact();
    const ExpSum* v = lim.v.exact();
    if (s1 == nullptr || q == nullptr || v == nullptr) {
        throw Error(ErrorCode::InternalError, "closed-form cost needs the exponential-sum solution");
    }
    const double rho = lim.params.rho;
    const double m2 = second_moment(lim.dist);
    const cplx ss = discounted_product(*s1, *s1, rho);
    const cplx qv = discounted_product(*q, *v, rho);
    SocialCost c;
    c.linear_term = 2.0 * (*s1)(0.0) * q0;
    c.g_term = -(m2 / lim.params.r) * ss.real();
    c.qv_term = qv.real();
    c.value = c.linear_term + c.g_term + c.qv_term;
    c.imag_residue = std::max(std::abs(ss.imag()) * m2 / lim.params.r, std::abs(qv.imag()));
    c.quadrature_value = social_cost_quadrature(lim, q0);
    if (c.imag_residue > 1e-9 || std::abs(c.value - c.quadrature_value) > 1e-6 * std::max(1.0, std::abs(c.value))) {
        std::ostringstream os;
        os << "closed-form social cost " << c.value << " disagrees with quadrature " << c.quadrature_value;
        throw Error(ErrorCode::InternalError, os.str());
    }
    return c;
}

double social_cost_quadrature(const SocialLimit& lim, double q0) {
    const double rho = lim.params.rho;
    const double m2 = second_moment(lim.dist);
    return 2.0 * lim.s1(0.0) * q0 - (m2 / lim.params.r) * discounted_quadrature(lim.s1, lim.s1, rho) +
           discounted_quadrature(lim.q, lim.v, rho);
}

ScalarPath strategy_social(const SocialLimit& limit, double b_i) { return limit.s1.scaled(-b_i / limit.params.r); }

}  // namespace sticky
