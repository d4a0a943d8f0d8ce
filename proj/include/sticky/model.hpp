#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace sticky {

/// Scalar market constants. Inverse-demand slope is fixed at 1.
struct MarketParams {
    double alpha = 1.0;  ///< price adjustment speed
    double beta = 10.0;  ///< demand intercept
    double mu = 0.15;    ///< output friction
    double sigma = 0.2;  ///< output diffusion coefficient
    double rho = 0.6;    ///< discount rate
    double r = 1.0;      ///< adjustment-cost weight
    double c = 2.0;      ///< unit production cost

    friend bool operator==(const MarketParams&, const MarketParams&) = default;
};

/// Throws sticky::Error naming the first violated constraint; otherwise
/// returns the input unchanged.
MarketParams validate_params(const MarketParams& params);

struct Atom {
    double theta = 1.0;
    double weight = 1.0;

    friend bool operator==(const Atom&, const Atom&) = default;
};

/// Finite mixture of point masses, sorted by theta with distinct atoms.
using Mixture = std::vector<Atom>;

/// F_N: one atom per distinct gain, weight = multiplicity / N.
Mixture empirical_distribution(std::span<const double> gains);

double mixture_mean(const Mixture& dist);
double second_moment(const Mixture& dist);

/// Checks weights positive and summing to one, thetas positive. Returns the
/// mixture sorted and merged.
Mixture normalize_mixture(Mixture dist);

struct Population {
    std::vector<double> gains;
    Mixture limit_dist;
    double theta_bound = 0.0;

    /// N identical firms with gain b; F is the point mass at b.
    static Population uniform(std::size_t n, double b = 1.0);

    /// Gains drawn i.i.d. from `dist`; deterministic in `seed`.
    static Population sample(const Mixture& dist, std::size_t n, std::uint64_t seed,
                             double theta_bound = 0.0);

    [[nodiscard]] std::size_t size() const noexcept { return gains.size(); }
    [[nodiscard]] bool is_point_mass() const noexcept { return limit_dist.size() == 1; }
};

/// Throws INVALID_POPULATION on any invariant violation. A nonpositive
/// theta_bound is replaced by the largest gain or atom.
Population validate_population(Population pop, double mean_tol = 1e-9);

/// |second moment of F_N - second moment of F|.
double epsilon_n(const Population& pop);

struct InitialConditions {
    double p0 = 1.0;
    double q0_mean = 2.0;
    double q0_var = 0.2;
    bool truncate_initial_output = false;

    friend bool operator==(const InitialConditions&, const InitialConditions&) = default;
};

InitialConditions validate_initial(const InitialConditions& init);

/// Running cost L(p, q, u) = -p q + c q + r u^2.
inline double running_cost(const MarketParams& m, double p, double q, double u) noexcept {
    return -p * q + m.c * q + m.r * u * u;
}

}  // namespace sticky
