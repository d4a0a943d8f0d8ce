#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"

#include "sticky/error.hpp"
#include "sticky/nash.hpp"

using namespace sticky;

namespace {

MarketParams high_friction() {
    MarketParams m = oracle::baseline();
    m.mu = 1.0;
    return m;
}

double sup_distance(const ScalarPath& a, const ScalarPath& b, double t_end, double h = 0.01) {
    double worst = 0.0;
    for (double t = 0.0; t <= t_end; t += h) worst = std::max(worst, std::abs(a(t) - b(t)));
    return worst;
}

}  // namespace

TEST_SUITE("nash") {

TEST_CASE("riccati roots") {
    const MarketParams m = oracle::baseline();
    const auto k = riccati_root(m, 1.0);
    CHECK(k.selected == 0.0);
    CHECK(k.rejected == doctest::Approx(-0.9));
    CHECK(k.selected_margin == doctest::Approx(-m.mu - m.rho / 2.0));
    MarketParams m2 = m;
    m2.r = 0.5;
    m2.mu = 1.0;
    m2.rho = 1.0;
    const auto k2 = riccati_root(m2, 2.0);
    CHECK(k2.rejected == doctest::Approx(-0.375));
    CHECK(k2.rejected_margin == doctest::Approx(1.5));
}

TEST_CASE("riccati filter isolates zero on random draws") {
    std::mt19937_64 gen(21);
    std::uniform_real_distribution<double> u(0.05, 5.0);
    for (int i = 0; i < 200; ++i) {
        MarketParams m = oracle::baseline();
        m.mu = u(gen);
        m.rho = u(gen);
        m.r = u(gen);
        const double b = u(gen);
        const auto k = riccati_root(m, b);
        CHECK(k.selected == 0.0);
        CHECK(k.selected_margin < 0.0);
        CHECK(k.rejected_margin > 0.0);
        CHECK(m.rho * k.rejected == doctest::Approx(-2.0 * m.mu * k.rejected - b * b / m.r * k.rejected * k.rejected));
    }
}

TEST_CASE("baseline steady state") {
    const NashLimit lim = solve_uniform(oracle::baseline(), 1.0, {});
    CHECK(lim.z[0] == doctest::Approx(3.4694).epsilon(1e-4));
    CHECK(lim.z[1] == doctest::Approx(6.5306).epsilon(1e-4));
    CHECK(lim.z[2] == doctest::Approx(-0.9796).epsilon(1e-4));
    const Eigen::Vector3d res = nash_matrix(lim.params, 1.0) * lim.z + nash_offset(lim.params);
    CHECK(res.norm() <= 1e-9);
    CHECK(lim.contraction_bound == doctest::Approx(4.444).epsilon(1e-3 / 4.444));
}

TEST_CASE("steady state sandwich on random draws") {
    std::mt19937_64 gen(22);
    std::uniform_real_distribution<double> u(0.05, 5.0);
    for (int i = 0; i < 200; ++i) {
        MarketParams m = oracle::baseline();
        m.alpha = u(gen);
        m.mu = u(gen);
        m.rho = u(gen);
        m.r = u(gen);
        m.beta = 1.0 + u(gen);
        m.c = m.beta * std::uniform_real_distribution<double>(0.05, 0.95)(gen);
        const Eigen::Vector3d z = nash_steady_state_closed_form(m, u(gen));
        CHECK(z[0] > m.c);
        CHECK(z[0] < m.beta);
        CHECK(z[1] > 0.0);
        CHECK(z[2] < 0.0);
    }
}

TEST_CASE("starting at the steady state stays there") {
    const MarketParams m = oracle::baseline();
    const Eigen::Vector3d z = nash_steady_state_closed_form(m, 1.0);
    const NashLimit lim = solve_uniform(m, 1.0, {z[0], z[1], 0.2, false});
    for (auto a : lim.a_coeffs) CHECK(std::abs(a) < 1e-12);
    for (double t : {0.0, 1.0, 10.0}) {
        CHECK(lim.p(t) == doctest::Approx(z[0]).epsilon(1e-12));
        CHECK(lim.s(t) == doctest::Approx(z[2]).epsilon(1e-12));
    }
}

TEST_CASE("spectral trajectories match an independent collocation solve") {
    for (const MarketParams& m : {oracle::baseline(), high_friction()}) {
        const NashLimit lim = solve_uniform(m, 1.0, {});
        const auto bvp = oracle::nash_bvp(m, 1.0, 1.0, 2.0);
        const auto& y = bvp.nodes();
        double worst = 0.0;
        for (Eigen::Index k = 0; k < y.rows(); ++k) {
            const double t = bvp.h() * static_cast<double>(k);
            worst = std::max({worst, std::abs(lim.p(t) - y(k, 0)), std::abs(lim.q(t) - y(k, 1)),
                              std::abs(lim.s(t) - y(k, 2))});
        }
        CHECK(worst < 1e-7);
        CHECK(lim.j_nash_inf == doctest::Approx(oracle::nash_cost(bvp, m, 1.0, 2.0)).epsilon(1e-7));
    }
}

TEST_CASE("trajectory residuals") {
    const MarketParams m = oracle::baseline();
    const NashLimit lim = solve_uniform(m, 1.0, {});
    const double h = 1e-3;
    double worst = 0.0;
    double worst_s = 0.0;
    for (int k = 0; k < 50000; k += 7) {
        const double t0 = h * k;
        const double t = t0 + h / 2;
        const Eigen::Vector3d y(lim.p(t), lim.q(t), lim.s(t));
        const Eigen::Vector3d dy((lim.p(t0 + h) - lim.p(t0)) / h, (lim.q(t0 + h) - lim.q(t0)) / h,
                                 (lim.s(t0 + h) - lim.s(t0)) / h);
        worst = std::max(worst, (dy - nash_matrix(m, 1.0) * y - nash_offset(m)).norm());
        worst_s = std::max(worst_s, std::abs(m.rho * y[2] - dy[2] + m.mu * y[2] - (m.c - y[0]) / 2.0));
    }
    CHECK(worst <= 1e-6);
    CHECK(worst_s <= 1e-6);
    const Eigen::Vector3d end(lim.p(lim.t_max), lim.q(lim.t_max), lim.s(lim.t_max));
    CHECK((end - lim.z).norm() <= 1e-6);
}

TEST_CASE("closed-form cost agrees with quadrature") {
    for (double alpha : {0.1, 0.2, 0.5, 1.0, 5.0}) {
        MarketParams m = oracle::baseline();
        m.alpha = alpha;
        const NashLimit lim = solve_uniform(m, 1.0, {});
        const NashCost c = nash_cost_closed_form(lim, 1.0, 2.0);
        CHECK(c.value == doctest::Approx(c.quadrature_value).epsilon(1e-6));
        CHECK(c.value == doctest::Approx(c.linear_term + c.g0).epsilon(1e-14));
        CHECK(c.g0 == doctest::Approx(c.g0_unweighted));
    }
}

TEST_CASE("costs across the alpha sweep") {
    const double alphas[5] = {0.1, 0.2, 0.5, 1.0, 5.0};
    const double want[5] = {-0.0694872, -2.5553377, -7.1819616, -10.7045803, -15.6804307};
    for (int i = 0; i < 5; ++i) {
        MarketParams m = oracle::baseline();
        m.alpha = alphas[i];
        const auto bvp = oracle::nash_bvp(m, 1.0, 1.0, 2.0, 60.0 + 20.0 / m.alpha);
        const double oracle_j = oracle::nash_cost(bvp, m, 1.0, 2.0);
        CHECK(oracle_j == doctest::Approx(want[i]).epsilon(1e-6));
        CHECK(solve_uniform(m, 1.0, {}).j_nash_inf == doctest::Approx(oracle_j).epsilon(1e-7));
    }
}

TEST_CASE("the gain weight in g(0) is visible away from b^2 = r") {
    MarketParams m = oracle::baseline();
    m.r = 2.0;
    const NashLimit lim = solve_uniform(m, 1.0, {});
    const NashCost c = nash_cost_closed_form(lim, 1.0, 2.0);
    CHECK(c.g0 == doctest::Approx(0.5 * c.g0_unweighted).epsilon(1e-12));
}

TEST_CASE("zero s gives zero cost") {
    NashLimit lim;
    lim.params = oracle::baseline();
    lim.s = ScalarPath(ExpSum{});
    CHECK(nash_cost_closed_form(lim, 1.0, 2.0).value == 0.0);
}

TEST_CASE("strategies") {
    const NashLimit lim = solve_uniform(oracle::baseline(), 1.0, {});
    const ScalarPath u = strategy_nash(lim, 1.0);
    CHECK(u(1e6) == doctest::Approx(0.9796).epsilon(1e-4));
    CHECK(strategy_nash(lim, 0.0)(3.0) == 0.0);
    const ScalarPath u2 = strategy_nash(lim, 2.0);
    const ScalarPath u3 = strategy_nash(lim, 3.0);
    for (double t : {0.0, 0.5, 4.0, 20.0}) CHECK(u2(t) / u3(t) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("fixed point matches the spectral route under contraction") {
    const MarketParams m = high_friction();
    CHECK(nash_contraction_bound(m, 1.0) == doctest::Approx(0.3125));
    const NashLimit spec = solve_uniform(m, 1.0, {});
    const NashLimit fp = solve_fixedpoint(m, {{1.0, 1.0}}, {});
    REQUIRE(fp.fixed_point);
    CHECK(fp.fixed_point->converged);
    CHECK(sup_distance(spec.p, fp.p, fp.t_max) <= 1e-5);
    CHECK(sup_distance(spec.q, fp.q, fp.t_max) <= 1e-5);
    CHECK(sup_distance(spec.s, fp.s, fp.t_max) <= 1e-5);
    CHECK(fp.j_nash_inf == doctest::Approx(spec.j_nash_inf).epsilon(1e-5));
}

TEST_CASE("the converged aggregate is a fixed point of the map") {
    const MarketParams m = high_friction();
    const FixedPointOptions opt;
    const NashLimit fp = solve_fixedpoint(m, {{1.0, 1.0}}, {}, opt);
    const auto q = fp.q.sample(opt.dt, opt.nodes(m));
    const auto next = nash_map(m, {{1.0, 1.0}}, {}, fp.z, opt.dt, q);
    double change = 0.0;
    for (std::size_t k = 0; k < q.size(); ++k) change = std::max(change, std::abs(next.qbar[k] - q[k]));
    CHECK(change <= opt.tol);
}

TEST_CASE("mixtures: spectral route equals the fixed point") {
    const MarketParams m = high_friction();
    const Mixture f{{0.8, 0.5}, {1.2, 0.5}};
    const NashLimit spec = solve_spectral(m, f, {});
    const NashLimit fp = solve_fixedpoint(m, f, {});
    CHECK(sup_distance(spec.q, fp.q, fp.t_max) <= 1e-5);
    REQUIRE(spec.q_theta.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) CHECK(sup_distance(spec.q_theta[i], fp.q_theta[i], fp.t_max) <= 1e-5);
    CHECK(spec.j_nash_inf == doctest::Approx(fp.j_nash_inf).epsilon(1e-5));
    for (double t : {0.0, 1.0, 7.5, 40.0}) {
        CHECK(spec.q(t) == doctest::Approx(0.5 * spec.q_theta[0](t) + 0.5 * spec.q_theta[1](t)).epsilon(1e-6));
    }
}

TEST_CASE("divergent iteration reports its diagnostics") {
    FixedPointOptions opt;
    opt.max_iters = 30;
    try {
        solve_fixedpoint(oracle::baseline(), {{1.0, 1.0}}, {}, opt);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NoConvergence);
        CHECK(std::string(e.what()).find("damping 0.5") != std::string::npos);
    }
}

TEST_CASE("invalid inputs") {
    CHECK_THROWS_AS(solve_uniform(oracle::baseline(), 0.0, {}), Error);
    MarketParams bad = oracle::baseline();
    bad.c = 20.0;
    CHECK_THROWS_AS(solve_uniform(bad, 1.0, {}), Error);
}

}
