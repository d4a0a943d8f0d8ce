#include "sticky/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include "sticky/error.hpp"
#include "sticky/rng.hpp"

namespace sticky {

double SimConfig::resolved_horizon(const MarketParams& m) const { return horizon > 0.0 ? horizon : 30.0 / m.rho; }

std::size_t SimConfig::steps(const MarketParams& m) const {
    return static_cast<std::size_t>(std::ceil(resolved_horizon(m) / dt - 1e-9));
}

std::size_t SimConfig::stride() const {
    if (record_every > 0) return record_every;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.05 / dt)));
}

void validate_sim(const SimConfig& cfg, const MarketParams& m) {
    if (cfg.n_firms < 1) throw Error(ErrorCode::InvalidConfig, "n_firms must be >= 1");
    if (cfg.n_paths < 1) throw Error(ErrorCode::InvalidConfig, "n_paths must be >= 1");
    if (!std::isfinite(cfg.dt) || !(cfg.dt > 0.0)) throw Error(ErrorCode::InvalidConfig, "dt must be > 0");
    const double limit = 0.5 / std::max(m.alpha, m.mu);
    if (cfg.dt > limit) {
        std::ostringstream os;
        os << "dt = " << cfg.dt << " exceeds the explicit-scheme bound 0.5 / max(alpha, mu) = " << limit;
        throw Error(ErrorCode::UnstableStep, os.str());
    }
    const double h = cfg.resolved_horizon(m);
    if (!std::isfinite(h) || !(h > 0.0)) throw Error(ErrorCode::InvalidConfig, "horizon must be > 0");
    if (h < 10.0 / m.rho && !cfg.horizon_override) {
        std::ostringstream os;
        os << "horizon " << h << " is below 10 / rho = " << 10.0 / m.rho << " (set horizon_override to allow)";
        throw Error(ErrorCode::InvalidConfig, os.str());
    }
    if (cfg.threads < 1) throw Error(ErrorCode::InvalidConfig, "threads must be >= 1");
    for (double q : cfg.quantiles) {
        if (!(q >= 0.0 && q <= 1.0)) throw Error(ErrorCode::InvalidConfig, "quantile levels must lie in [0, 1]");
    }
}

namespace {

using rng::CounterRng;
using rng::NormalStream;
using rng::Purpose;

template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = next++; i < count; i = next++) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

double initial_output(const CounterRng& gen, const InitialConditions& init, std::uint32_t rep, std::uint32_t firm) {
    double q = init.q0_mean;
    if (init.q0_var > 0.0) q += std::sqrt(init.q0_var) * gen.normal(Purpose::InitialOutput, rep, firm, 0);
    if (init.truncate_initial_output) q = std::max(0.0, q);
    return q;
}

std::vector<double> on_grid(const ScalarPath& path, double dt, std::size_t n) { return path.sample(dt, n); }

double mean_of(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v;
    return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

double stderr_of(const std::vector<double>& x) {
    if (x.size() < 2) return 0.0;
    const double mu = mean_of(x);
    double ss = 0.0;
    for (double v : x) ss += (v - mu) * (v - mu);
    return std::sqrt(ss / static_cast<double>(x.size() - 1) / static_cast<double>(x.size()));
}

double quantile_sorted(const std::vector<double>& sorted, double level) {
    if (sorted.empty()) return 0.0;
    const double pos = level * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct ReplicationOut {
    std::vector<double> costs;
    std::vector<double> p;
    std::vector<double> qbar;
    std::vector<double> vbar;
    std::vector<std::vector<double>> firms;
    double final_abs_cost = 0.0;
};

struct LimitRefs {
    const ScalarPath* control = nullptr;  ///< s for Nash, s1 for social
    const ScalarPath* p = nullptr;
    const ScalarPath* q = nullptr;
    const ScalarPath* v = nullptr;
};

SimResult simulate_open_loop(const MarketParams& params, const Population& pop_in, const InitialConditions& init_in,
                             const LimitRefs& lim, const SimConfig& cfg, bool social) {
    const MarketParams m = validate_params(params);
    const InitialConditions init = validate_initial(init_in);
    validate_sim(cfg, m);
    if (pop_in.size() != cfg.n_firms) {
        throw Error(ErrorCode::InvalidConfig, "population size differs from n_firms");
    }
    const Population pop = validate_population(pop_in);
    const std::size_t n = cfg.n_firms;
    const std::size_t steps = cfg.steps(m);
    const std::size_t stride = cfg.stride();
    const double dt = cfg.dt;
    const std::vector<double> s = on_grid(*lim.control, dt, steps + 1);
    std::vector<double> disc(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) disc[k] = std::exp(-m.rho * dt * static_cast<double>(k)) * dt;

    std::vector<std::size_t> rec_steps;
    for (std::size_t k = 0; k <= steps; k += stride) rec_steps.push_back(k);
    const std::size_t n_rec = rec_steps.size();
    const std::size_t keep_firms = std::min(cfg.firm_paths, n);

    std::vector<double> ucoef(n);
    std::vector<double> drift(n);
    for (std::size_t i = 0; i < n; ++i) {
        ucoef[i] = -pop.gains[i] / m.r;
        drift[i] = pop.gains[i] * ucoef[i];
    }
    const CounterRng gen(cfg.seed);
    const double noise = m.sigma * std::sqrt(dt);
    const double inv_n = 1.0 / static_cast<double>(n);

    std::vector<ReplicationOut> outs(cfg.n_paths);
    parallel_for(cfg.n_paths, cfg.threads, [&](std::size_t r) {
        const auto rep = static_cast<std::uint32_t>(r);
        ReplicationOut& o = outs[r];
        o.costs.assign(n, 0.0);
        o.p.reserve(n_rec);
        o.qbar.reserve(n_rec);
        if (social) o.vbar.reserve(n_rec);
        if (r == 0) o.firms.assign(keep_firms, {});
        std::vector<double> q(n);
        std::vector<double> v(n, 0.0);
        std::vector<NormalStream> streams;
        streams.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            q[i] = initial_output(gen, init, rep, static_cast<std::uint32_t>(i));
            streams.emplace_back(gen, Purpose::Brownian, rep, static_cast<std::uint32_t>(i));
        }
        double p = init.p0;
        std::size_t next_rec = 0;
        for (std::size_t k = 0;; ++k) {
            double qsum = 0.0;
            for (std::size_t i = 0; i < n; ++i) qsum += q[i];
            const double qbar = qsum * inv_n;
            if (next_rec < n_rec && rec_steps[next_rec] == k) {
                o.p.push_back(p);
                o.qbar.push_back(qbar);
                if (social) {
                    double vs = 0.0;
                    for (std::size_t i = 0; i < n; ++i) vs += v[i];
                    o.vbar.push_back(vs * inv_n);
                }
                for (std::size_t i = 0; i < o.firms.size(); ++i) o.firms[i].push_back(q[i]);
                ++next_rec;
            }
            if (k == steps) {
                double acc = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double u = ucoef[i] * s[k];
                    acc += std::abs(running_cost(m, p, q[i], u));
                }
                o.final_abs_cost = acc * inv_n;
                break;
            }
            const double w = disc[k];
            const double sk = s[k];
            const double p_next = p + dt * (-m.alpha * p - m.alpha * qbar + m.alpha * m.beta);
            for (std::size_t i = 0; i < n; ++i) {
                const double u = ucoef[i] * sk;
                o.costs[i] += w * ((m.c - p) * q[i] + m.r * u * u);
                if (social) v[i] += dt * (-m.alpha * q[i] - m.alpha * v[i]);
                q[i] += dt * (-m.mu * q[i] + drift[i] * sk) + noise * streams[i].next();
            }
            p = p_next;
        }
    });

    SimResult res;
    res.social = social;
    res.n_firms = n;
    res.n_paths = cfg.n_paths;
    res.dt = dt;
    res.horizon = dt * static_cast<double>(steps);
    res.quantile_levels = cfg.quantiles;
    for (auto k : rec_steps) res.t.push_back(dt * static_cast<double>(k));

    res.per_firm_costs.assign(n, 0.0);
    res.per_firm_stderr.assign(n, 0.0);
    std::vector<double> col(cfg.n_paths);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t r = 0; r < cfg.n_paths; ++r) col[r] = outs[r].costs[i];
        res.per_firm_costs[i] = mean_of(col);
        res.per_firm_stderr[i] = stderr_of(col);
    }
    res.social_cost = mean_of(res.per_firm_costs);
    for (std::size_t r = 0; r < cfg.n_paths; ++r) col[r] = mean_of(outs[r].costs);
    res.social_cost_stderr = stderr_of(col);
    double final_abs = 0.0;
    for (const auto& o : outs) final_abs += o.final_abs_cost;
    final_abs /= static_cast<double>(cfg.n_paths);
    res.tail_fraction =
        std::exp(-m.rho * res.horizon) * final_abs / m.rho / std::max(1e-300, std::abs(res.social_cost));

    res.price_mean.assign(n_rec, 0.0);
    res.avg_output_mean.assign(n_rec, 0.0);
    if (social) res.v_mean.assign(n_rec, 0.0);
    auto& mf = res.mf_errors;
    mf.price_curve.assign(n_rec, 0.0);
    mf.output_curve.assign(n_rec, 0.0);
    if (social) mf.v_curve.assign(n_rec, 0.0);
    res.price_quantiles.assign(cfg.quantiles.size(), std::vector<double>(n_rec));
    res.output_quantiles.assign(cfg.quantiles.size(), std::vector<double>(n_rec));
    const double inv_paths = 1.0 / static_cast<double>(cfg.n_paths);
    std::vector<double> pcol(cfg.n_paths);
    std::vector<double> qcol(cfg.n_paths);
    for (std::size_t j = 0; j < n_rec; ++j) {
        const double t = res.t[j];
        const double pr = (*lim.p)(t);
        const double qr = (*lim.q)(t);
        const double vr = social ? (*lim.v)(t) : 0.0;
        for (std::size_t r = 0; r < cfg.n_paths; ++r) {
            const auto& o = outs[r];
            pcol[r] = o.p[j];
            qcol[r] = o.qbar[j];
            res.price_mean[j] += o.p[j] * inv_paths;
            res.avg_output_mean[j] += o.qbar[j] * inv_paths;
            mf.price_curve[j] += (o.p[j] - pr) * (o.p[j] - pr) * inv_paths;
            mf.output_curve[j] += (o.qbar[j] - qr) * (o.qbar[j] - qr) * inv_paths;
            if (social) {
                res.v_mean[j] += o.vbar[j] * inv_paths;
                mf.v_curve[j] += (o.vbar[j] - vr) * (o.vbar[j] - vr) * inv_paths;
            }
        }
        std::sort(pcol.begin(), pcol.end());
        std::sort(qcol.begin(), qcol.end());
        for (std::size_t l = 0; l < cfg.quantiles.size(); ++l) {
            res.price_quantiles[l][j] = quantile_sorted(pcol, cfg.quantiles[l]);
            res.output_quantiles[l][j] = quantile_sorted(qcol, cfg.quantiles[l]);
        }
    }
    auto sup_with_stderr = [&](const std::vector<double>& curve, auto member, const ScalarPath& ref, double& sup,
                               double& se) {
        const auto j = static_cast<std::size_t>(std::max_element(curve.begin(), curve.end()) - curve.begin());
        sup = curve[j];
        const double target = ref(res.t[j]);
        for (std::size_t r = 0; r < cfg.n_paths; ++r) {
            const double e = (outs[r].*member)[j] - target;
            col[r] = e * e;
        }
        se = stderr_of(col);
    };
    sup_with_stderr(mf.price_curve, &ReplicationOut::p, *lim.p, mf.price, mf.price_stderr);
    sup_with_stderr(mf.output_curve, &ReplicationOut::qbar, *lim.q, mf.output, mf.output_stderr);
    if (social) sup_with_stderr(mf.v_curve, &ReplicationOut::vbar, *lim.v, mf.v, mf.v_stderr);
    res.firm_paths = std::move(outs[0].firms);
    return res;
}

void require_same_params(const MarketParams& a, const MarketParams& b) {
    if (!(a == b)) throw Error(ErrorCode::ParamsMismatch, "limit was solved at different parameters");
}

}  // namespace

SimResult simulate_nash(const MarketParams& params, const Population& pop, const InitialConditions& init,
                        const NashLimit& limit, const SimConfig& config) {
    require_same_params(params, limit.params);
    return simulate_open_loop(params, pop, init, {&limit.s, &limit.p, &limit.q, nullptr}, config, false);
}

SimResult simulate_social(const MarketParams& params, const Population& pop, const InitialConditions& init,
                          const SocialLimit& limit, const SimConfig& config) {
    require_same_params(params, limit.params);
    return simulate_open_loop(params, pop, init, {&limit.s1, &limit.p, &limit.q, &limit.v}, config, true);
}

CostEstimate estimate_costs(const std::vector<PathBundle>& paths, const MarketParams& m) {
    CostEstimate est;
    if (paths.empty()) return est;
    const std::size_t n = paths.front().q.size();
    std::vector<std::vector<double>> per_rep(paths.size(), std::vector<double>(n, 0.0));
    for (std::size_t r = 0; r < paths.size(); ++r) {
        const auto& b = paths[r];
        if (b.q.size() != n || b.u.size() != n) {
            throw Error(ErrorCode::InternalError, "path bundles disagree on firm count");
        }
        for (std::size_t i = 0; i < n; ++i) {
            double j = 0.0;
            for (std::size_t k = 0; k < b.u[i].size(); ++k) {
                const double w = std::exp(-m.rho * b.dt * static_cast<double>(k)) * b.dt;
                j += w * running_cost(m, b.p[k], b.q[i][k], b.u[i][k]);
            }
            per_rep[r][i] = j;
        }
    }
    std::vector<double> col(paths.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t r = 0; r < paths.size(); ++r) col[r] = per_rep[r][i];
        est.per_firm_costs.push_back(mean_of(col));
        est.per_firm_stderr.push_back(stderr_of(col));
    }
    est.social_cost = mean_of(est.per_firm_costs);
    for (std::size_t r = 0; r < paths.size(); ++r) col[r] = mean_of(per_rep[r]);
    est.social_cost_stderr = stderr_of(col);
    return est;
}

double policy_control(const Policy& policy, std::size_t k, double p, double q) {
    if (const auto* ol = std::get_if<OpenLoopPolicy>(&policy)) return ol->u[k];
    const auto& fb = std::get<FeedbackPolicy>(policy);
    return -(fb.gain_p[k] * p + fb.gain_q[k] * q + fb.offset[k]);
}

PathBundle simulate_paths(const MarketParams& m, std::span<const double> gains, const InitialConditions& init,
                          double dt, std::size_t steps, std::uint64_t seed, std::uint32_t rep,
                          const ControlFn& control, bool track_v) {
    const std::size_t n = gains.size();
    const CounterRng gen(seed);
    const double noise = m.sigma * std::sqrt(dt);
    PathBundle b;
    b.dt = dt;
    b.p.assign(steps + 1, 0.0);
    b.q.assign(n, std::vector<double>(steps + 1, 0.0));
    b.u.assign(n, std::vector<double>(steps, 0.0));
    if (track_v) b.v.assign(n, std::vector<double>(steps + 1, 0.0));
    std::vector<NormalStream> streams;
    for (std::size_t i = 0; i < n; ++i) {
        b.q[i][0] = initial_output(gen, init, rep, static_cast<std::uint32_t>(i));
        streams.emplace_back(gen, Purpose::Brownian, rep, static_cast<std::uint32_t>(i));
    }
    b.p[0] = init.p0;
    for (std::size_t k = 0; k < steps; ++k) {
        double qbar = 0.0;
        for (std::size_t i = 0; i < n; ++i) qbar += b.q[i][k];
        qbar /= static_cast<double>(n);
        const double p = b.p[k];
        b.p[k + 1] = p + dt * (-m.alpha * p - m.alpha * qbar + m.alpha * m.beta);
        for (std::size_t i = 0; i < n; ++i) {
            const double q = b.q[i][k];
            const double u = control(i, k, p, q);
            b.u[i][k] = u;
            b.q[i][k + 1] = q + dt * (-m.mu * q + gains[i] * u) + noise * streams[i].next();
            if (track_v) b.v[i][k + 1] = b.v[i][k] + dt * (-m.alpha * q - m.alpha * b.v[i][k]);
        }
    }
    return b;
}

std::vector<std::vector<double>> nash_controls(const NashLimit& limit, std::span<const double> gains, double dt,
                                               std::size_t steps) {
    const auto s = limit.s.sample(dt, steps);
    std::vector<std::vector<double>> u(gains.size(), std::vector<double>(steps));
    for (std::size_t i = 0; i < gains.size(); ++i) {
        for (std::size_t k = 0; k < steps; ++k) u[i][k] = -gains[i] / limit.params.r * s[k];
    }
    return u;
}

namespace {

// Backward recursion for x = (p, q) with x+ = A x + B u + d_k, stage weight
// w_k = e^{-rho k dt} dt and stage cost w (x'Qx + 2 l'x + r u^2).
FeedbackPolicy riccati_policy(const MarketParams& m, double b, double self_weight, const std::vector<double>& others,
                              double dt, std::size_t steps) {
    Eigen::Matrix2d a;
    a << 1.0 - m.alpha * dt, -m.alpha * dt * self_weight, 0.0, 1.0 - m.mu * dt;
    const Eigen::Vector2d bv(0.0, b * dt);
    Eigen::Matrix2d q;
    q << 0.0, -0.5, -0.5, 0.0;
    const Eigen::Vector2d l(0.0, m.c / 2.0);
    Eigen::Matrix2d p = Eigen::Matrix2d::Zero();
    Eigen::Vector2d pv = Eigen::Vector2d::Zero();
    FeedbackPolicy pol;
    pol.gain_p.assign(steps, 0.0);
    pol.gain_q.assign(steps, 0.0);
    pol.offset.assign(steps, 0.0);
    for (std::size_t k = steps; k-- > 0;) {
        const double w = std::exp(-m.rho * dt * static_cast<double>(k)) * dt;
        const Eigen::Vector2d d(dt * (m.alpha * m.beta - m.alpha * others[k]), 0.0);
        const double h = w * m.r + bv.dot(p * bv);
        const Eigen::RowVector2d g_row = (bv.transpose() * p * a) / h;
        const double g = (bv.dot(p * d) + bv.dot(pv)) / h;
        const Eigen::Vector2d pv_next = w * l + a.transpose() * (p * d + pv) - g_row.transpose() * (h * g);
        const Eigen::Matrix2d p_next = w * q + a.transpose() * p * a - h * g_row.transpose() * g_row;
        if (!(h > 0.0) || !p_next.allFinite() || !pv_next.allFinite() || p_next.cwiseAbs().maxCoeff() > 1e12) {
            std::ostringstream os;
            os << "backward Riccati recursion diverged at step " << k << " of " << steps;
            throw Error(ErrorCode::RiccatiBlowup, os.str());
        }
        pol.gain_p[k] = g_row[0];
        pol.gain_q[k] = g_row[1];
        pol.offset[k] = g;
        p = p_next;
        pv = pv_next;
    }
    return pol;
}

// Mean of sum_{j != firm} q_j / N under the Nash controls, Euler-consistent.
std::vector<double> others_mean(const MarketParams& m, std::span<const double> gains, std::size_t firm,
                                double q0, const std::vector<double>& s, double dt, std::size_t steps) {
    const auto n = static_cast<double>(gains.size());
    double m2_others = 0.0;
    for (std::size_t j = 0; j < gains.size(); ++j) {
        if (j != firm) m2_others += gains[j] * gains[j];
    }
    std::vector<double> out(steps + 1);
    double decay = 1.0;
    double phi = 0.0;
    for (std::size_t k = 0; k <= steps; ++k) {
        out[k] = ((n - 1.0) * q0 * decay + m2_others * phi) / n;
        decay *= 1.0 - m.mu * dt;
        phi = (1.0 - m.mu * dt) * phi - dt * s[k] / m.r;
    }
    return out;
}

void check_firm(const Population& pop, const SimConfig& cfg, std::size_t firm) {
    if (pop.size() != cfg.n_firms) throw Error(ErrorCode::InvalidConfig, "population size differs from n_firms");
    if (firm >= pop.size()) throw Error(ErrorCode::InvalidConfig, "deviating firm index out of range");
}

}  // namespace

FeedbackPolicy best_response(const MarketParams& params, const Population& pop, const InitialConditions& init,
                             const NashLimit& limit, const SimConfig& cfg, std::size_t firm) {
    const MarketParams m = validate_params(params);
    validate_sim(cfg, m);
    check_firm(pop, cfg, firm);
    const std::size_t steps = cfg.steps(m);
    const auto s = limit.s.sample(cfg.dt, steps + 1);
    const auto others = others_mean(m, pop.gains, firm, init.q0_mean, s, cfg.dt, steps);
    return riccati_policy(m, pop.gains[firm], 1.0 / static_cast<double>(pop.size()), others, cfg.dt, steps);
}

StrategyComparison compare_strategies(const MarketParams& params, const Population& pop_in,
                                      const InitialConditions& init_in, const NashLimit& limit, const SimConfig& cfg,
                                      std::size_t firm, const Policy& pa, const Policy& pb) {
    const MarketParams m = validate_params(params);
    const InitialConditions init = validate_initial(init_in);
    validate_sim(cfg, m);
    check_firm(pop_in, cfg, firm);
    const Population pop = validate_population(pop_in);
    const std::size_t n = pop.size();
    const std::size_t steps = cfg.steps(m);
    const double dt = cfg.dt;
    const auto s = limit.s.sample(dt, steps + 1);
    std::vector<double> disc(steps);
    for (std::size_t k = 0; k < steps; ++k) disc[k] = std::exp(-m.rho * dt * static_cast<double>(k)) * dt;
    const CounterRng gen(cfg.seed);
    const double noise = m.sigma * std::sqrt(dt);
    const double inv_n = 1.0 / static_cast<double>(n);
    const double b = pop.gains[firm];

    std::vector<double> ja(cfg.n_paths);
    std::vector<double> jb(cfg.n_paths);
    parallel_for(cfg.n_paths, cfg.threads, [&](std::size_t r) {
        const auto rep = static_cast<std::uint32_t>(r);
        // Others follow open-loop strategies, so their paths do not depend on
        // firm `firm` and are shared by both runs.
        std::vector<double> others_sum(steps + 1, 0.0);
        std::vector<double> q;
        std::vector<double> drift;
        std::vector<NormalStream> streams;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == firm) continue;
            q.push_back(initial_output(gen, init, rep, static_cast<std::uint32_t>(j)));
            drift.push_back(-pop.gains[j] * pop.gains[j] / m.r);
            streams.emplace_back(gen, Purpose::Brownian, rep, static_cast<std::uint32_t>(j));
        }
        for (std::size_t k = 0;; ++k) {
            double acc = 0.0;
            for (double x : q) acc += x;
            others_sum[k] = acc;
            if (k == steps) break;
            for (std::size_t j = 0; j < q.size(); ++j) {
                q[j] += dt * (-m.mu * q[j] + drift[j] * s[k]) + noise * streams[j].next();
            }
        }
        const double q_init = initial_output(gen, init, rep, static_cast<std::uint32_t>(firm));
        std::vector<double> own(steps);
        NormalStream own_stream(gen, Purpose::Brownian, rep, static_cast<std::uint32_t>(firm));
        for (auto& z : own) z = own_stream.next();
        auto run = [&](const Policy& pol) {
            double p = init.p0;
            double qi = q_init;
            double j = 0.0;
            for (std::size_t k = 0; k < steps; ++k) {
                const double u = policy_control(pol, k, p, qi);
                j += disc[k] * running_cost(m, p, qi, u);
                const double p_next = p + dt * (-m.alpha * p - m.alpha * (others_sum[k] + qi) * inv_n + m.alpha * m.beta);
                qi += dt * (-m.mu * qi + b * u) + noise * own[k];
                p = p_next;
            }
            return j;
        };
        ja[r] = run(pa);
        jb[r] = run(pb);
    });
    StrategyComparison out;
    std::vector<double> d(cfg.n_paths);
    for (std::size_t r = 0; r < cfg.n_paths; ++r) d[r] = ja[r] - jb[r];
    out.j_a = mean_of(ja);
    out.j_b = mean_of(jb);
    out.j_a_stderr = stderr_of(ja);
    out.diff_mean = mean_of(d);
    out.diff_stderr = stderr_of(d);
    return out;
}

DeviationGap deviation_gap(const MarketParams& params, const Population& pop, const InitialConditions& init,
                           const NashLimit& limit, const SimConfig& cfg, std::size_t firm) {
    const MarketParams m = validate_params(params);
    validate_sim(cfg, m);
    check_firm(pop, cfg, firm);
    const std::size_t steps = cfg.steps(m);
    const double dt = cfg.dt;
    const auto s = limit.s.sample(dt, steps + 1);
    const double b = pop.gains[firm];

    OpenLoopPolicy nominal;
    nominal.u.resize(steps);
    for (std::size_t k = 0; k < steps; ++k) nominal.u[k] = -b / m.r * s[k];
    const FeedbackPolicy br = best_response(m, pop, init, limit, cfg, firm);
    const auto cmp = compare_strategies(m, pop, init, limit, cfg, firm, nominal, br);

    DeviationGap gap;
    gap.j_nominal = cmp.j_a;
    gap.j_deviated = cmp.j_b;
    gap.gain_raw = cmp.diff_mean;
    gap.eps_hat = std::max(0.0, cmp.diff_mean);
    gap.stderr = cmp.diff_stderr;

    // Same construction with no self-impact and no noise: the firm then
    // faces the deterministic Euler mean path of the whole population.
    std::vector<double> all(steps + 1);
    {
        double m2 = 0.0;
        for (double g : pop.gains) m2 += g * g;
        m2 /= static_cast<double>(pop.size());
        double decay = 1.0;
        double phi = 0.0;
        for (std::size_t k = 0; k <= steps; ++k) {
            all[k] = init.q0_mean * decay + m2 * phi;
            decay *= 1.0 - m.mu * dt;
            phi = (1.0 - m.mu * dt) * phi - dt * s[k] / m.r;
        }
    }
    const FeedbackPolicy br0 = riccati_policy(m, b, 0.0, all, dt, steps);
    auto run = [&](const Policy& pol) {
        double p = init.p0;
        double qi = init.q0_mean;
        double j = 0.0;
        for (std::size_t k = 0; k < steps; ++k) {
            const double u = policy_control(pol, k, p, qi);
            j += std::exp(-m.rho * dt * static_cast<double>(k)) * dt * running_cost(m, p, qi, u);
            const double p_next = p + dt * (-m.alpha * p - m.alpha * all[k] + m.alpha * m.beta);
            qi += dt * (-m.mu * qi + b * u);
            p = p_next;
        }
        return j;
    };
    gap.discretization_floor = run(nominal) - run(br0);
    gap.eps_hat_net = gap.gain_raw - gap.discretization_floor;
    return gap;
}

PassivityResult passivity_check(const std::vector<PathBundle>& nominal, const std::vector<PathBundle>& deviated,
                                const MarketParams& m) {
    if (nominal.size() != deviated.size()) {
        throw Error(ErrorCode::InternalError, "nominal and deviated path counts differ");
    }
    PassivityResult res;
    for (std::size_t r = 0; r < nominal.size(); ++r) {
        const auto& a = nominal[r];
        const auto& b = deviated[r];
        const std::size_t n = a.q.size();
        const std::size_t len = a.p.size();
        const bool with_v = !a.v.empty() && !b.v.empty();
        double integral = 0.0;
        for (std::size_t k = 0; k < len; ++k) {
            double qt = 0.0;
            double vt = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                qt += b.q[i][k] - a.q[i][k];
                if (with_v) vt += b.v[i][k] - a.v[i][k];
            }
            qt /= static_cast<double>(n);
            vt /= static_cast<double>(n);
            const double pt = b.p[k] - a.p[k];
            if (k + 1 < len) integral += std::exp(-m.rho * a.dt * static_cast<double>(k)) * a.dt * (-pt) * qt;
            if (with_v) res.max_identity_gap = std::max(res.max_identity_gap, std::abs(vt - pt));
        }
        res.per_path.push_back(integral);
    }
    res.integral_mean = mean_of(res.per_path);
    res.integral_stderr = stderr_of(res.per_path);
    return res;
}

PassivityTrial run_passivity_trial(const MarketParams& params, const Population& pop_in, const InitialConditions& init,
                                   const SocialLimit& limit, const SimConfig& cfg, DeviationKind kind,
                                   double amplitude) {
    const MarketParams m = validate_params(params);
    validate_sim(cfg, m);
    if (pop_in.size() != cfg.n_firms) throw Error(ErrorCode::InvalidConfig, "population size differs from n_firms");
    const Population pop = validate_population(pop_in);
    const std::size_t steps = cfg.steps(m);
    const double dt = cfg.dt;
    const auto s1 = limit.s1.sample(dt, steps);
    const CounterRng gen(cfg.seed);

    PassivityTrial trial;
    trial.nominal.resize(cfg.n_paths);
    trial.deviated.resize(cfg.n_paths);
    parallel_for(cfg.n_paths, cfg.threads, [&](std::size_t r) {
        const auto rep = static_cast<std::uint32_t>(r);
        auto nominal = [&](std::size_t i, std::size_t k, double, double) { return -pop.gains[i] / m.r * s1[k]; };
        // Piecewise-constant on unit time intervals, uniform in [-amplitude, amplitude].
        auto shift = [&](std::size_t i, std::size_t k) -> double {
            switch (kind) {
                case DeviationKind::None:
                    return 0.0;
                case DeviationKind::ConstantShiftAll:
                    return amplitude;
                case DeviationKind::RandomOneFirm: {
                    if (i != 0) return 0.0;
                    const auto block = static_cast<std::uint32_t>(static_cast<double>(k) * dt);
                    const double u = gen.uniform_pair(Purpose::Deviation, rep, 0, block).first;
                    return amplitude * (2.0 * u - 1.0);
                }
            }
            return 0.0;
        };
        auto deviated = [&](std::size_t i, std::size_t k, double p, double q) {
            return nominal(i, k, p, q) + shift(i, k);
        };
        trial.nominal[r] = simulate_paths(m, pop.gains, init, dt, steps, cfg.seed, rep, nominal, true);
        trial.deviated[r] = simulate_paths(m, pop.gains, init, dt, steps, cfg.seed, rep, deviated, true);
    });
    trial.result = passivity_check(trial.nominal, trial.deviated, m);
    return trial;
}

}  // namespace sticky
