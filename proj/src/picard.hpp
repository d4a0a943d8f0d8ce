#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "sticky/error.hpp"
#include "sticky/nash.hpp"

namespace sticky::detail {

struct PicardOutcome {
    std::vector<double> q;
    FixedPointReport report;
};

// Iterates q <- q + d (T(q) - q) in sup norm; retries once with d = 0.5.
template <class Map>
PicardOutcome picard(Map&& map, const std::vector<double>& start, const FixedPointOptions& opt, const char* what) {
    std::vector<double> dampings{opt.damping};
    if (opt.retry_damped && opt.damping != 0.5) dampings.push_back(0.5);
    std::ostringstream diag;
    for (double d : dampings) {
        FixedPointReport rep;
        rep.damping = d;
        std::vector<double> q = start;
        for (int it = 1; it <= opt.max_iters; ++it) {
            std::vector<double> tq = map(q);
            double change = 0.0;
            for (std::size_t k = 0; k < q.size(); ++k) change = std::max(change, std::abs(tq[k] - q[k]));
            if (!std::isfinite(change)) change = std::numeric_limits<double>::infinity();
            rep.change_history.push_back(change);
            rep.iterations = it;
            rep.final_change = change;
            if (change <= opt.tol) {
                rep.converged = true;
                return {std::move(tq), std::move(rep)};
            }
            if (change > 1e12) break;
            for (std::size_t k = 0; k < q.size(); ++k) q[k] += d * (tq[k] - q[k]);
        }
        const auto& h = rep.change_history;
        double rate = 0.0;
        if (h.size() >= 2 && h[h.size() - 2] > 0.0) rate = h.back() / h[h.size() - 2];
        diag << " [damping " << d << ": " << rep.iterations << " iterations, last change " << rep.final_change
             << ", observed ratio " << rate << "]";
    }
    throw Error(ErrorCode::NoConvergence, std::string(what) + " fixed point did not converge" + diag.str());
}

}  // namespace sticky::detail
