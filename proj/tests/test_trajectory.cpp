#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"

#include "sticky/error.hpp"
#include "sticky/kernels.hpp"
#include "sticky/trajectory.hpp"

using namespace sticky;

TEST_SUITE("trajectory") {

TEST_CASE("exponential sums evaluate and differentiate") {
    ExpSum f{1.5, {cplx(2.0, 1.0), cplx(2.0, -1.0)}, {cplx(-0.5, 0.3), cplx(-0.5, -0.3)}};
    const double t = 1.7;
    const double want = 1.5 + 4.0 * std::exp(-0.5 * t) * std::cos(0.3 * t) - 2.0 * std::exp(-0.5 * t) * std::sin(0.3 * t);
    CHECK(f(t) == doctest::Approx(want).epsilon(1e-14));
    const double h = 1e-5;
    CHECK(f.derivative(t) == doctest::Approx((f(t + h) - f(t - h)) / (2 * h)).epsilon(1e-8));
    CHECK(f.scaled(-2.0)(t) == doctest::Approx(-2.0 * want).epsilon(1e-14));
}

TEST_CASE("discounted product against Simpson") {
    const ExpSum f{0.5, {cplx(1.0, -0.5), cplx(1.0, 0.5)}, {cplx(-0.4, 0.9), cplx(-0.4, -0.9)}};
    const ExpSum g{-1.0, {cplx(0.7, 0.0)}, {cplx(-1.3, 0.0)}};
    const double rho = 0.6;
    const double h = 1e-3;
    const int n = 80000;
    double sum = 0.0;
    for (int k = 0; k <= n; ++k) {
        const double t = h * k;
        const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
        sum += w * std::exp(-rho * t) * f(t) * g(t);
    }
    sum *= h / 3.0;
    const cplx exact = discounted_product(f, g, rho);
    CHECK(exact.real() == doctest::Approx(sum).epsilon(1e-10));
    CHECK(std::abs(exact.imag()) < 1e-14);
    CHECK(discounted_quadrature(ScalarPath(f), ScalarPath(g), rho) == doctest::Approx(exact.real()).epsilon(1e-10));
}

TEST_CASE("discounted product refuses divergent integrals") {
    const ExpSum f{0.0, {cplx(1.0, 0.0)}, {cplx(0.5, 0.0)}};
    CHECK_THROWS_AS(discounted_product(f, f, 0.6), Error);
}

TEST_CASE("sampled paths interpolate and hold their tail") {
    const SampledPath s{0.5, {0.0, 1.0, 3.0}, 7.0};
    CHECK(s(0.25) == doctest::Approx(0.5));
    CHECK(s(0.75) == doctest::Approx(2.0));
    CHECK(s(1.0) == doctest::Approx(3.0));
    CHECK(s(5.0) == 7.0);
    const ScalarPath p(s);
    CHECK_FALSE(p.is_exact());
    CHECK(p.scaled(2.0)(0.75) == doctest::Approx(4.0));
    CHECK(p.sample(0.25, 3) == std::vector<double>{0.0, 0.5, 1.0});
}

}

TEST_SUITE("kernels") {

TEST_CASE("forward convolution is exact for linear forcing") {
    const double kappa = 0.8;
    const double h = 0.1;
    const std::size_t n = 200;
    std::vector<double> f(n);
    for (std::size_t k = 0; k < n; ++k) f[k] = 2.0 - 0.3 * h * static_cast<double>(k);
    const auto y = kernels::forward_convolve(f, kappa, h, 1.0);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = h * static_cast<double>(k);
        const double a = 2.0;
        const double b = -0.3;
        const double part = a / kappa - b / (kappa * kappa) + b * t / kappa;
        const double want = part + (1.0 - (a / kappa - b / (kappa * kappa))) * std::exp(-kappa * t);
        CHECK(y[k] == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("forward convolution against RK4 for smooth forcing") {
    auto f = [](double t) { return std::sin(2.0 * t) * std::exp(-0.1 * t); };
    auto error = [&](double kappa, double h) {
        const auto n = static_cast<std::size_t>(std::llround(30.0 / h)) + 1;
        std::vector<double> fs(n);
        for (std::size_t k = 0; k < n; ++k) fs[k] = f(h * static_cast<double>(k));
        const auto y = kernels::forward_convolve(fs, kappa, h, 0.5);
        const auto ref = oracle::rk4_decay(f, kappa, h, n, 0.5);
        double worst = 0.0;
        for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, std::abs(y[k] - ref[k]));
        return worst;
    };
    for (double kappa : {0.15, 1.0, 5.0}) {
        const double coarse = error(kappa, 0.02);
        const double fine = error(kappa, 0.01);
        CHECK(fine < 1e-4);
        CHECK(coarse / fine == doctest::Approx(4.0).epsilon(0.1));
    }
}

TEST_CASE("backward bounded solution") {
    const double kappa = 0.75;
    const double h = 0.01;
    const std::size_t n = 6001;
    auto g = [](double t) { return 1.0 + std::exp(-t); };
    std::vector<double> gs(n);
    for (std::size_t k = 0; k < n; ++k) gs[k] = g(h * static_cast<double>(k));
    const double tail = 1.0 / kappa;
    const auto y = kernels::backward_bounded(gs, kappa, h, tail);
    for (std::size_t k = 0; k < n; k += 250) {
        const double t = h * static_cast<double>(k);
        const double want = 1.0 / kappa + std::exp(-t) / (kappa + 1.0);
        CHECK(y[k] == doctest::Approx(want).epsilon(1e-5));
    }
}

TEST_CASE("step weights integrate constants and ramps exactly") {
    for (double kh : {1e-6, 1e-3, 0.5}) {
        const auto w = kernels::forward_weights(kh, 1.0);
        CHECK(w.decay == doctest::Approx(std::exp(-kh)).epsilon(1e-15));
        const double m0 = -std::expm1(-kh) / kh;
        CHECK(w.w0 + w.w1 == doctest::Approx(m0).epsilon(1e-12));
        const auto b = kernels::backward_weights(kh, 1.0);
        CHECK(b.w0 + b.w1 == doctest::Approx(m0).epsilon(1e-12));
    }
    for (double k : {0.5, 2.0}) {
        CHECK(kernels::forward_weights(k, 1.0).w1 == doctest::Approx((k - 1.0 + std::exp(-k)) / (k * k)).epsilon(1e-13));
        CHECK(kernels::backward_weights(k, 1.0).w1 ==
              doctest::Approx((1.0 - (1.0 + k) * std::exp(-k)) / (k * k)).epsilon(1e-13));
    }
}

}
