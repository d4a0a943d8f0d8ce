#include "sticky/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "sticky/error.hpp"
#include "sticky/rng.hpp"

namespace sticky {

namespace {

void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) {
        throw Error(ErrorCode::NonfiniteParameter, std::string(name) + " is not finite");
    }
}

void require_positive(double v, const char* name, ErrorCode code) {
    if (!(v > 0.0)) {
        std::ostringstream os;
        os << name << " must be > 0 (got " << v << ")";
        throw Error(code, os.str());
    }
}

}  // namespace

MarketParams validate_params(const MarketParams& m) {
    require_finite(m.alpha, "alpha");
    require_finite(m.beta, "beta");
    require_finite(m.mu, "mu");
    require_finite(m.sigma, "sigma");
    require_finite(m.rho, "rho");
    require_finite(m.r, "r");
    require_finite(m.c, "c");
    require_positive(m.alpha, "alpha", ErrorCode::NonpositiveParameter);
    require_positive(m.beta, "beta", ErrorCode::NonpositiveParameter);
    require_positive(m.mu, "mu", ErrorCode::NonpositiveParameter);
    require_positive(m.rho, "rho", ErrorCode::NonpositiveParameter);
    require_positive(m.r, "r", ErrorCode::NonpositiveWeight);
    if (m.sigma < 0.0) {
        throw Error(ErrorCode::NegativeDiffusion, "sigma must be >= 0");
    }
    require_positive(m.c, "c", ErrorCode::NonpositiveCost);
    if (!(m.c < m.beta)) {
        std::ostringstream os;
        os << "c must be < beta (c=" << m.c << ", beta=" << m.beta << ")";
        throw Error(ErrorCode::CostExceedsIntercept, os.str());
    }
    return m;
}

Mixture empirical_distribution(std::span<const double> gains) {
    if (gains.empty()) {
        throw Error(ErrorCode::EmptyGains, "gains list is empty");
    }
    std::map<double, std::size_t> counts;
    for (double g : gains) {
        require_finite(g, "gain");
        ++counts[g];
    }
    const auto n = static_cast<double>(gains.size());
    Mixture out;
    out.reserve(counts.size());
    for (const auto& [theta, k] : counts) {
        out.push_back({theta, static_cast<double>(k) / n});
    }
    return out;
}

double mixture_mean(const Mixture& dist) {
    double s = 0.0;
    for (const auto& a : dist) s += a.weight * a.theta;
    return s;
}

double second_moment(const Mixture& dist) {
    double s = 0.0;
    for (const auto& a : dist) s += a.weight * a.theta * a.theta;
    return s;
}

Mixture normalize_mixture(Mixture dist) {
    if (dist.empty()) {
        throw Error(ErrorCode::InvalidPopulation, "mixture has no atoms");
    }
    double total = 0.0;
    for (const auto& a : dist) {
        if (!std::isfinite(a.theta) || !(a.theta > 0.0)) {
            throw Error(ErrorCode::InvalidPopulation, "mixture atom theta must be > 0");
        }
        if (!std::isfinite(a.weight) || !(a.weight > 0.0)) {
            throw Error(ErrorCode::InvalidPopulation, "mixture weight must be > 0");
        }
        total += a.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw Error(ErrorCode::InvalidPopulation, "mixture weights must sum to 1");
    }
    std::sort(dist.begin(), dist.end(), [](const Atom& x, const Atom& y) { return x.theta < y.theta; });
    Mixture merged;
    for (const auto& a : dist) {
        if (!merged.empty() && merged.back().theta == a.theta) {
            merged.back().weight += a.weight;
        } else {
            merged.push_back(a);
        }
    }
    return merged;
}

Population Population::uniform(std::size_t n, double b) {
    Population pop;
    pop.gains.assign(n, b);
    pop.limit_dist = {{b, 1.0}};
    pop.theta_bound = b;
    return pop;
}

Population Population::sample(const Mixture& dist, std::size_t n, std::uint64_t seed, double theta_bound) {
    Mixture f = normalize_mixture(dist);
    rng::CounterRng gen(seed);
    Population pop;
    pop.limit_dist = f;
    pop.gains.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = gen.uniform_pair(rng::Purpose::GainSample, 0, static_cast<std::uint32_t>(i), 0).first;
        double acc = 0.0;
        double pick = f.back().theta;
        for (const auto& a : f) {
            acc += a.weight;
            if (u <= acc) {
                pick = a.theta;
                break;
            }
        }
        pop.gains.push_back(pick);
    }
    pop.theta_bound = theta_bound;
    return pop;
}

Population validate_population(Population pop, double mean_tol) {
    if (pop.gains.empty()) {
        throw Error(ErrorCode::EmptyGains, "population has no firms");
    }
    pop.limit_dist = normalize_mixture(std::move(pop.limit_dist));
    double largest = pop.limit_dist.back().theta;
    for (double b : pop.gains) {
        if (!std::isfinite(b) || !(b > 0.0)) {
            throw Error(ErrorCode::InvalidPopulation, "every gain must be > 0");
        }
        largest = std::max(largest, b);
    }
    if (!(pop.theta_bound > 0.0)) {
        pop.theta_bound = largest;
    }
    if (largest > pop.theta_bound) {
        throw Error(ErrorCode::InvalidPopulation, "gain exceeds theta_bound");
    }
    if (std::abs(mixture_mean(pop.limit_dist) - 1.0) > mean_tol) {
        std::ostringstream os;
        os << "limit distribution mean must be 1 (got " << mixture_mean(pop.limit_dist) << ")";
        throw Error(ErrorCode::InvalidPopulation, os.str());
    }
    if (!(second_moment(pop.limit_dist) > 0.0)) {
        throw Error(ErrorCode::InvalidPopulation, "limit distribution second moment must be > 0");
    }
    return pop;
}

double epsilon_n(const Population& pop) {
    return std::abs(second_moment(empirical_distribution(pop.gains)) - second_moment(pop.limit_dist));
}

InitialConditions validate_initial(const InitialConditions& init) {
    if (!std::isfinite(init.p0) || !(init.p0 > 0.0)) {
        throw Error(ErrorCode::InvalidInitialConditions, "p0 must be > 0");
    }
    if (!std::isfinite(init.q0_mean) || !(init.q0_mean > 0.0)) {
        throw Error(ErrorCode::InvalidInitialConditions, "q0_mean must be > 0");
    }
    if (!std::isfinite(init.q0_var) || init.q0_var < 0.0) {
        throw Error(ErrorCode::InvalidInitialConditions, "q0_var must be >= 0");
    }
    return init;
}

}  // namespace sticky
