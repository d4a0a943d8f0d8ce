#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"

#include "sticky/error.hpp"
#include "sticky/simulator.hpp"

using namespace sticky;

namespace {

InitialConditions exact_start() {
    InitialConditions init;
    init.q0_var = 0.0;
    return init;
}

SimConfig small(std::size_t n, double dt, double horizon, std::size_t paths) {
    SimConfig c;
    c.n_firms = n;
    c.dt = dt;
    c.horizon = horizon;
    c.horizon_override = true;
    c.n_paths = paths;
    c.seed = 7;
    return c;
}

double sup_gap(const std::vector<double>& t, const std::vector<double>& x, const ScalarPath& ref) {
    double worst = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) worst = std::max(worst, std::abs(x[k] - ref(t[k])));
    return worst;
}

double time_average(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

PathBundle frozen(double p, double q, double u, double dt, std::size_t steps) {
    PathBundle b;
    b.dt = dt;
    b.p.assign(steps + 1, p);
    b.q.assign(1, std::vector<double>(steps + 1, q));
    b.u.assign(1, std::vector<double>(steps, u));
    return b;
}

}  // namespace

TEST_SUITE("simulator") {

TEST_CASE("deterministic single firm follows the Nash limit at first order") {
    MarketParams m = oracle::baseline();
    m.sigma = 0.0;
    const auto init = exact_start();
    const auto lim = solve_uniform(m, 1.0, init);
    const auto pop = Population::uniform(1);
    const auto coarse = simulate_nash(m, pop, init, lim, small(1, 0.01, 20.0, 1));
    const auto fine = simulate_nash(m, pop, init, lim, small(1, 0.005, 20.0, 1));
    const double e1 = sup_gap(coarse.t, coarse.price_mean, lim.p);
    const double e2 = sup_gap(fine.t, fine.price_mean, lim.p);
    CHECK(e1 < 0.05);
    CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.2));
    const double q1 = sup_gap(coarse.t, coarse.avg_output_mean, lim.q);
    const double q2 = sup_gap(fine.t, fine.avg_output_mean, lim.q);
    CHECK(q1 / q2 == doctest::Approx(2.0).epsilon(0.2));
    CHECK(coarse.mf_errors.price == doctest::Approx(e1 * e1).epsilon(0.05));
}

TEST_CASE("deterministic single firm follows the social limit at first order") {
    MarketParams m = oracle::baseline();
    m.sigma = 0.0;
    const auto init = exact_start();
    const auto lim = solve_social_uniform(m, 1.0, init);
    const auto pop = Population::uniform(1);
    const auto coarse = simulate_social(m, pop, init, lim, small(1, 0.01, 20.0, 1));
    const auto fine = simulate_social(m, pop, init, lim, small(1, 0.005, 20.0, 1));
    const double e1 = sup_gap(coarse.t, coarse.price_mean, lim.p);
    const double e2 = sup_gap(fine.t, fine.price_mean, lim.p);
    CHECK(e1 < 0.05);
    CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.2));
    const double v1 = sup_gap(coarse.t, coarse.v_mean, lim.v);
    const double v2 = sup_gap(fine.t, fine.v_mean, lim.v);
    CHECK(v1 / v2 == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("same seed gives identical results for any thread count") {
    const MarketParams m = oracle::baseline();
    const InitialConditions init;
    const auto lim = solve_uniform(m, 1.0, init);
    const auto pop = Population::uniform(20);
    auto cfg = small(20, 0.02, 10.0, 12);
    cfg.firm_paths = 3;
    const auto a = simulate_nash(m, pop, init, lim, cfg);
    cfg.threads = 3;
    const auto b = simulate_nash(m, pop, init, lim, cfg);
    CHECK(a.price_mean == b.price_mean);
    CHECK(a.avg_output_mean == b.avg_output_mean);
    CHECK(a.per_firm_costs == b.per_firm_costs);
    CHECK(a.social_cost == b.social_cost);
    CHECK(a.mf_errors.output_curve == b.mf_errors.output_curve);
    CHECK(a.firm_paths == b.firm_paths);
    CHECK(a.price_quantiles == b.price_quantiles);
    cfg.seed = 8;
    const auto c = simulate_nash(m, pop, init, lim, cfg);
    CHECK(c.price_mean != a.price_mean);
}

TEST_CASE("adding firms extends existing noise") {
    const MarketParams m = oracle::baseline();
    const InitialConditions init;
    const auto lim = solve_uniform(m, 1.0, init);
    auto cfg = small(10, 0.02, 5.0, 1);
    cfg.firm_paths = 10;
    const auto a = simulate_nash(m, Population::uniform(10), init, lim, cfg);
    cfg.n_firms = 15;
    const auto b = simulate_nash(m, Population::uniform(15), init, lim, cfg);
    for (std::size_t i = 0; i < 10; ++i) CHECK(a.firm_paths[i] == b.firm_paths[i]);
}

TEST_CASE("social cost is the mean of per-firm costs") {
    const MarketParams m = oracle::baseline();
    const InitialConditions init;
    const auto lim = solve_uniform(m, 1.0, init);
    const auto r = simulate_nash(m, Population::uniform(8), init, lim, small(8, 0.02, 10.0, 10));
    double s = 0.0;
    for (double j : r.per_firm_costs) s += j;
    CHECK(r.social_cost == doctest::Approx(s / 8.0).epsilon(1e-14));
    CHECK(r.tail_fraction >= 0.0);
}

TEST_CASE("estimate_costs on synthetic paths") {
    const MarketParams m = oracle::baseline();
    const double dt = 0.01;
    const std::size_t steps = 5000;
    const auto zero = estimate_costs({frozen(3.0, 0.0, 0.0, dt, steps)}, m);
    CHECK(zero.social_cost == 0.0);
    CHECK(zero.per_firm_costs.at(0) == 0.0);

    const double p = 4.0;
    const double q = 1.5;
    const double u = -0.5;
    const auto est = estimate_costs({frozen(p, q, u, dt, steps), frozen(p, q, u, dt, steps)}, m);
    const double l = -p * q + m.c * q + m.r * u * u;
    const double discrete = l * dt * (1.0 - std::exp(-m.rho * dt * steps)) / (1.0 - std::exp(-m.rho * dt));
    CHECK(est.per_firm_costs[0] == doctest::Approx(discrete).epsilon(1e-12));
    CHECK(est.per_firm_costs[0] == doctest::Approx(l / m.rho).epsilon(5e-3));
    CHECK(est.per_firm_stderr[0] == doctest::Approx(0.0));
    CHECK(estimate_costs({}, m).per_firm_costs.empty());
}

TEST_CASE("Monte Carlo Nash cost matches the limit cost") {
    const MarketParams m = oracle::baseline();
    const InitialConditions init;
    const auto lim = solve_uniform(m, 1.0, init);
    auto cfg = small(50, 0.0025, 20.0, 200);
    cfg.threads = 4;
    const auto r = simulate_nash(m, Population::uniform(50), init, lim, cfg);
    CHECK(std::abs(r.social_cost - lim.j_nash_inf) <= 3.0 * r.social_cost_stderr + 2e-3);
    CHECK(lim.j_nash_inf == doctest::Approx(-10.7045803).epsilon(1e-6));
    CHECK(sup_gap(r.t, r.price_mean, lim.p) <= 0.1);
}

TEST_CASE("social strategies raise price and lower output") {
    const MarketParams m = oracle::baseline();
    const InitialConditions init;
    const auto nash = solve_uniform(m, 1.0, init);
    const auto soc = solve_social_uniform(m, 1.0, init);
    const auto pop = Population::uniform(50);
    auto cfg = small(50, 0.01, 30.0, 40);
    cfg.threads = 4;
    const auto a = simulate_nash(m, pop, init, nash, cfg);
    const auto b = simulate_social(m, pop, init, soc, cfg);
    for (std::size_t k = 0; k < a.t.size(); ++k) {
        if (a.t[k] >= 10.0) CHECK(b.price_mean[k] > a.price_mean[k]);
    }
    CHECK(time_average(b.avg_output_mean) < time_average(a.avg_output_mean));
    CHECK(b.social_cost < a.social_cost);
}

TEST_CASE("mean-field errors scale like 1/N") {
    const MarketParams m = oracle::baseline();
    const InitialConditions init;
    const auto nash = solve_uniform(m, 1.0, init);
    const auto soc = solve_social_uniform(m, 1.0, init);
    auto cfg = small(25, 0.01, 12.0, 200);
    cfg.threads = 4;
    const auto a = simulate_social(m, Population::uniform(25), init, soc, cfg);
    const auto an = simulate_nash(m, Population::uniform(25), init, nash, cfg);
    cfg.n_firms = 100;
    const auto b = simulate_social(m, Population::uniform(100), init, soc, cfg);
    const auto bn = simulate_nash(m, Population::uniform(100), init, nash, cfg);
    const double ratio_q = an.mf_errors.output / bn.mf_errors.output;
    const double ratio_v = a.mf_errors.v / b.mf_errors.v;
    CHECK(ratio_q >= 2.5);
    CHECK(ratio_q <= 6.0);
    CHECK(ratio_v >= 2.5);
    CHECK(ratio_v <= 6.0);
    CHECK(std::isnan(an.mf_errors.v));

    // E p^2 + E q^2 from the recorded moments.
    auto bound = [&](const SimResult& r, const NashLimit& l) {
        double worst = 0.0;
        for (std::size_t k = 0; k < r.t.size(); ++k) {
            const double pb = l.p(r.t[k]);
            const double qb = l.q(r.t[k]);
            const double ep2 = r.mf_errors.price_curve[k] + 2.0 * pb * r.price_mean[k] - pb * pb;
            const double eq2 = r.mf_errors.output_curve[k] + 2.0 * qb * r.avg_output_mean[k] - qb * qb;
            worst = std::max(worst, ep2 + eq2);
        }
        return worst;
    };
    CHECK(bound(an, nash) == doctest::Approx(bound(bn, nash)).epsilon(0.02));
}

TEST_CASE("deviation gap of a single firm is positive") {
    const MarketParams m = oracle::baseline();
    const InitialConditions init;
    const auto lim = solve_uniform(m, 1.0, init);
    const auto g = deviation_gap(m, Population::uniform(1), init, lim, small(1, 0.01, 20.0, 50));
    CHECK(g.eps_hat > 1.0);
    CHECK(g.gain_raw > 10.0 * g.stderr);
    CHECK(g.eps_hat_net == doctest::Approx(g.gain_raw - g.discretization_floor));
    CHECK(g.j_nominal - g.j_deviated == doctest::Approx(g.gain_raw));
}

TEST_CASE("deviation gap shrinks with N") {
    const MarketParams m = oracle::baseline();
    const InitialConditions init;
    const auto lim = solve_uniform(m, 1.0, init);
    auto cfg = small(10, 0.02, 15.0, 40);
    cfg.threads = 4;
    const auto a = deviation_gap(m, Population::uniform(10), init, lim, cfg);
    cfg.n_firms = 100;
    const auto b = deviation_gap(m, Population::uniform(100), init, lim, cfg);
    CHECK(a.eps_hat > b.eps_hat);
}

TEST_CASE("a policy compared with itself has zero gap") {
    const MarketParams m = oracle::baseline();
    const InitialConditions init;
    const auto lim = solve_uniform(m, 1.0, init);
    const auto pop = Population::uniform(5);
    const auto cfg = small(5, 0.02, 10.0, 10);
    const auto br = best_response(m, pop, init, lim, cfg, 0);
    const auto cmp = compare_strategies(m, pop, init, lim, cfg, 0, br, br);
    CHECK(cmp.diff_mean == 0.0);
    CHECK(cmp.diff_stderr == 0.0);
    CHECK(cmp.j_a == cmp.j_b);
    CHECK(br.gain_p.size() == cfg.steps(m));
}

TEST_CASE("best response beats the Nash policy against others on Nash") {
    const MarketParams m = oracle::baseline();
    const InitialConditions init;
    const auto lim = solve_uniform(m, 1.0, init);
    const auto pop = Population::uniform(5);
    const auto cfg = small(5, 0.02, 15.0, 30);
    const auto steps = cfg.steps(m);
    OpenLoopPolicy nominal;
    nominal.u = nash_controls(lim, pop.gains, cfg.dt, steps)[0];
    const auto cmp = compare_strategies(m, pop, init, lim, cfg, 0, nominal, best_response(m, pop, init, lim, cfg, 0));
    CHECK(cmp.diff_mean > -3.0 * cmp.diff_stderr);
}

TEST_CASE("passivity with no deviation is exactly zero") {
    const MarketParams m = oracle::baseline();
    const InitialConditions init;
    const auto lim = solve_social_uniform(m, 1.0, init);
    const auto cfg = small(10, 0.02, 10.0, 5);
    const auto t = run_passivity_trial(m, Population::uniform(10), init, lim, cfg, DeviationKind::None);
    CHECK(t.result.integral_mean == 0.0);
    CHECK(t.result.max_identity_gap == 0.0);
}

TEST_CASE("passivity integral is nonnegative up to noise") {
    const MarketParams m = oracle::baseline();
    const InitialConditions init;
    const auto lim = solve_social_uniform(m, 1.0, init);
    auto cfg = small(20, 0.02, 15.0, 20);
    for (std::uint64_t seed : {3u, 4u, 5u}) {
        cfg.seed = seed;
        for (auto kind : {DeviationKind::RandomOneFirm, DeviationKind::ConstantShiftAll}) {
            const auto t = run_passivity_trial(m, Population::uniform(20), init, lim, cfg, kind, 1.0);
            CHECK(t.result.integral_mean >= -3.0 * t.result.integral_stderr);
            CHECK(t.result.max_identity_gap <= 5.0 * cfg.dt);
            CHECK(t.result.per_path.size() == cfg.n_paths);
        }
    }
    cfg.seed = 3;
    const auto shift = run_passivity_trial(m, Population::uniform(20), init, lim, cfg, DeviationKind::ConstantShiftAll);
    CHECK(shift.result.integral_mean > 0.0);
}

TEST_CASE("configuration errors") {
    const MarketParams m = oracle::baseline();
    const InitialConditions init;
    const auto lim = solve_uniform(m, 1.0, init);
    const auto pop = Population::uniform(4);
    auto cfg = small(4, 0.6, 20.0, 2);
    try {
        simulate_nash(m, pop, init, lim, cfg);
        FAIL("expected UNSTABLE_STEP");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnstableStep);
    }
    cfg = small(4, 0.01, 5.0, 2);
    cfg.horizon_override = false;
    CHECK_THROWS_AS(validate_sim(cfg, m), Error);
    cfg = small(4, 0.01, 5.0, 0);
    CHECK_THROWS_AS(validate_sim(cfg, m), Error);
    cfg = small(5, 0.01, 5.0, 2);
    CHECK_THROWS_AS(simulate_nash(m, pop, init, lim, cfg), Error);
    SimConfig d;
    CHECK(d.resolved_horizon(m) == doctest::Approx(30.0 / m.rho));
}

TEST_CASE("limit solved at other parameters is rejected") {
    const MarketParams m = oracle::baseline();
    const InitialConditions init;
    MarketParams other = m;
    other.alpha = 2.0;
    const auto lim = solve_uniform(other, 1.0, init);
    try {
        simulate_nash(m, Population::uniform(2), init, lim, small(2, 0.01, 5.0, 2));
        FAIL("expected PARAMS_MISMATCH");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ParamsMismatch);
    }
}

}
