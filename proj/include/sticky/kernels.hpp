#pragma once

#include <span>
#include <vector>

namespace sticky::kernels {

/// Solves y' = -kappa y + f on a uniform grid, y(0) = y0, with f linear
/// between nodes and the exponential integrated exactly.
std::vector<double> forward_convolve(std::span<const double> f, double kappa, double h, double y0);

/// Bounded solution of y' = kappa y - g on [0, T], i.e.
/// y(t) = int_t^inf exp(-kappa (tau - t)) g(tau) dtau, with y(T) = y_end
/// standing in for the tail beyond the grid.
std::vector<double> backward_bounded(std::span<const double> g, double kappa, double h, double y_end);

struct StepWeights {
    double decay;  ///< exp(-kappa h)
    double w0;     ///< weight on the near node
    double w1;     ///< weight on the far node
};

/// Weights of int_0^h exp(-kappa (h - u)) f(u) du for linear f.
StepWeights forward_weights(double kappa, double h);
/// Weights of int_0^h exp(-kappa u) g(u) du for linear g.
StepWeights backward_weights(double kappa, double h);

}  // namespace sticky::kernels
