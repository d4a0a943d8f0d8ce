#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <variant>
#include <vector>

#include "sticky/model.hpp"
#include "sticky/nash.hpp"
#include "sticky/social.hpp"

namespace sticky {

struct SimConfig {
    std::size_t n_firms = 50;
    double dt = 0.01;
    double horizon = 0.0;          ///< 0 selects 30 / rho
    bool horizon_override = false;  ///< allow horizon < 10 / rho
    std::size_t n_paths = 200;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    std::size_t record_every = 0;  ///< 0 selects about 0.05 time units
    std::size_t firm_paths = 0;    ///< firm output paths kept from replication 0
    std::vector<double> quantiles{0.05, 0.5, 0.95};

    [[nodiscard]] double resolved_horizon(const MarketParams& m) const;
    [[nodiscard]] std::size_t steps(const MarketParams& m) const;
    [[nodiscard]] std::size_t stride() const;
};

/// Throws UNSTABLE_STEP for dt > 0.5 / max(alpha, mu) and INVALID_CONFIG for
/// other violations.
void validate_sim(const SimConfig& config, const MarketParams& m);

struct MfErrors {
    double price = 0.0;   ///< sup_t E|p - p_bar|^2
    double output = 0.0;  ///< sup_t E|q^(N) - q_bar|^2
    double v = std::numeric_limits<double>::quiet_NaN();
    double price_stderr = 0.0;  ///< across replications, at the maximizing time
    double output_stderr = 0.0;
    double v_stderr = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> price_curve;
    std::vector<double> output_curve;
    std::vector<double> v_curve;
};

struct SimResult {
    bool social = false;
    std::size_t n_firms = 0;
    std::size_t n_paths = 0;
    double dt = 0.0;
    double horizon = 0.0;

    std::vector<double> t;  ///< record times
    std::vector<double> price_mean;
    std::vector<double> avg_output_mean;
    std::vector<double> v_mean;  ///< social only
    std::vector<double> quantile_levels;
    std::vector<std::vector<double>> price_quantiles;   ///< [level][record]
    std::vector<std::vector<double>> output_quantiles;  ///< [level][record]
    std::vector<std::vector<double>> firm_paths;        ///< [firm][record], replication 0

    std::vector<double> per_firm_costs;
    std::vector<double> per_firm_stderr;
    double social_cost = 0.0;
    double social_cost_stderr = 0.0;
    double tail_fraction = 0.0;  ///< bound on truncated cost mass relative to |social_cost|

    MfErrors mf_errors;
};

SimResult simulate_nash(const MarketParams& params, const Population& pop, const InitialConditions& init,
                        const NashLimit& limit, const SimConfig& config);
SimResult simulate_social(const MarketParams& params, const Population& pop, const InitialConditions& init,
                          const SocialLimit& limit, const SimConfig& config);

/// One replication stored in full.
struct PathBundle {
    double dt = 0.0;
    std::vector<double> p;               ///< steps + 1
    std::vector<std::vector<double>> q;  ///< [firm][steps + 1]
    std::vector<std::vector<double>> u;  ///< [firm][steps]
    std::vector<std::vector<double>> v;  ///< [firm][steps + 1], empty unless tracked
};

struct CostEstimate {
    std::vector<double> per_firm_costs;
    std::vector<double> per_firm_stderr;
    double social_cost = 0.0;
    double social_cost_stderr = 0.0;
};

/// Left-endpoint discounted quadrature of L per replication, then averaged.
CostEstimate estimate_costs(const std::vector<PathBundle>& paths, const MarketParams& params);

/// Time-indexed control u_k.
struct OpenLoopPolicy {
    std::vector<double> u;
};

/// u_k = -(gain_p[k] p + gain_q[k] q + offset[k]).
struct FeedbackPolicy {
    std::vector<double> gain_p;
    std::vector<double> gain_q;
    std::vector<double> offset;
};

using Policy = std::variant<OpenLoopPolicy, FeedbackPolicy>;

double policy_control(const Policy& policy, std::size_t k, double p, double q);

/// Control of firm i at step k given price and own output.
using ControlFn = std::function<double(std::size_t firm, std::size_t k, double p, double q)>;

/// Full Euler-Maruyama paths for one replication under arbitrary controls.
PathBundle simulate_paths(const MarketParams& params, std::span<const double> gains, const InitialConditions& init,
                          double dt, std::size_t steps, std::uint64_t seed, std::uint32_t replication,
                          const ControlFn& control, bool track_v);

/// Open-loop Nash controls on the simulation grid for every firm.
std::vector<std::vector<double>> nash_controls(const NashLimit& limit, std::span<const double> gains, double dt,
                                               std::size_t steps);

/// Backward discounted Riccati recursion for firm `firm` against the others'
/// Nash strategies. Throws RICCATI_BLOWUP with the failing step.
FeedbackPolicy best_response(const MarketParams& params, const Population& pop, const InitialConditions& init,
                             const NashLimit& limit, const SimConfig& config, std::size_t firm);

struct StrategyComparison {
    double j_a = 0.0;
    double j_b = 0.0;
    double diff_mean = 0.0;  ///< E[J_a - J_b]
    double diff_stderr = 0.0;
    double j_a_stderr = 0.0;
};

/// Costs of firm `firm` under policies a and b with the other firms on their
/// Nash strategies and identical noise.
StrategyComparison compare_strategies(const MarketParams& params, const Population& pop, const InitialConditions& init,
                                      const NashLimit& limit, const SimConfig& config, std::size_t firm,
                                      const Policy& a, const Policy& b);

struct DeviationGap {
    double eps_hat = 0.0;
    double stderr = 0.0;
    double j_nominal = 0.0;
    double j_deviated = 0.0;
    double gain_raw = 0.0;  ///< E[J_nominal - J_deviated] before clamping
    /// Gap of the same construction with no self-impact and no noise: what
    /// time discretization alone contributes.
    double discretization_floor = 0.0;
    double eps_hat_net = 0.0;
};

DeviationGap deviation_gap(const MarketParams& params, const Population& pop, const InitialConditions& init,
                           const NashLimit& limit, const SimConfig& config, std::size_t deviating_firm = 0);

struct PassivityResult {
    double integral_mean = 0.0;
    double integral_stderr = 0.0;
    double max_identity_gap = 0.0;  ///< max over paths and t of |v~ - p~|
    std::vector<double> per_path;
};

/// Discounted integral of (-p~) q~^(N) between matched nominal and deviated
/// paths, with the pathwise check v~^(N) = p~.
PassivityResult passivity_check(const std::vector<PathBundle>& nominal, const std::vector<PathBundle>& deviated,
                                const MarketParams& params);

enum class DeviationKind { None, RandomOneFirm, ConstantShiftAll };

struct PassivityTrial {
    PassivityResult result;
    std::vector<PathBundle> nominal;
    std::vector<PathBundle> deviated;
};

/// Social strategies with and without a deviation, common noise.
PassivityTrial run_passivity_trial(const MarketParams& params, const Population& pop, const InitialConditions& init,
                                   const SocialLimit& limit, const SimConfig& config, DeviationKind kind,
                                   double amplitude = 1.0);

}  // namespace sticky
