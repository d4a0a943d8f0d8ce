#include "sticky/kernels.hpp"

#include <cmath>

#include "sticky/error.hpp"

namespace sticky::kernels {

namespace {

// int_0^h exp(-kappa u) du and int_0^h u exp(-kappa u) du.
void moments(double kappa, double h, double& m0, double& m1) {
    const double x = kappa * h;
    if (std::abs(x) < 1e-4) {
        m0 = h * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0);
        m1 = h * h * (0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0);
        return;
    }
    const double one_minus_e = -std::expm1(-x);
    m0 = one_minus_e / kappa;
    m1 = (one_minus_e / kappa - h * std::exp(-x)) / kappa;
}

}  // namespace

StepWeights forward_weights(double kappa, double h) {
    double m0 = 0.0;
    double m1 = 0.0;
    moments(kappa, h, m0, m1);
    // Substituting v = h - u: the far node carries (h m0 - m1) / h.
    const double w1 = (h * m0 - m1) / h;
    return {std::exp(-kappa * h), m0 - w1, w1};
}

StepWeights backward_weights(double kappa, double h) {
    double m0 = 0.0;
    double m1 = 0.0;
    moments(kappa, h, m0, m1);
    const double b1 = m1 / h;
    return {std::exp(-kappa * h), m0 - b1, b1};
}

std::vector<double> forward_convolve(std::span<const double> f, double kappa, double h, double y0) {
    if (f.empty()) throw Error(ErrorCode::InternalError, "forward_convolve on empty grid");
    const auto w = forward_weights(kappa, h);
    std::vector<double> y(f.size());
    y[0] = y0;
    for (std::size_t n = 0; n + 1 < f.size(); ++n) {
        y[n + 1] = w.decay * y[n] + w.w0 * f[n] + w.w1 * f[n + 1];
    }
    return y;
}

std::vector<double> backward_bounded(std::span<const double> g, double kappa, double h, double y_end) {
    if (g.empty()) throw Error(ErrorCode::InternalError, "backward_bounded on empty grid");
    const auto w = backward_weights(kappa, h);
    std::vector<double> y(g.size());
    y.back() = y_end;
    for (std::size_t n = g.size() - 1; n-- > 0;) {
        y[n] = w.decay * y[n + 1] + w.w0 * g[n] + w.w1 * g[n + 1];
    }
    return y;
}

}  // namespace sticky::kernels
