#include <cmath>
#include <vector>

#include "doctest.h"

#include "sticky/rng.hpp"

using sticky::rng::CounterRng;
using sticky::rng::NormalStream;
using sticky::rng::Philox4x32;
using sticky::rng::Purpose;

TEST_SUITE("rng") {

TEST_CASE("philox known-answer vectors") {
    struct Kat {
        Philox4x32::Counter ctr;
        Philox4x32::Key key;
        Philox4x32::Counter out;
    };
    const Kat kats[] = {
        {{0, 0, 0, 0}, {0, 0}, {0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}},
        {{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
         {0xffffffff, 0xffffffff},
         {0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}},
        {{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
         {0xa4093822, 0x299f31d0},
         {0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}},
    };
    for (const auto& k : kats) CHECK(Philox4x32::apply(k.ctr, k.key) == k.out);
}

TEST_CASE("philox is usable at compile time") {
    constexpr auto out = Philox4x32::apply({0, 0, 0, 0}, {0, 0});
    static_assert(out[0] == 0x6627e8d5u);
}

TEST_CASE("uniforms lie in (0, 1]") {
    const CounterRng rng(42);
    for (std::uint32_t b = 0; b < 10000; ++b) {
        const auto [u, v] = rng.uniform_pair(Purpose::Brownian, 0, 0, b);
        REQUIRE(u > 0.0);
        REQUIRE(u <= 1.0);
        REQUIRE(v > 0.0);
        REQUIRE(v <= 1.0);
    }
}

TEST_CASE("draws are addressed, not sequenced") {
    const CounterRng rng(7);
    const double x = rng.normal(Purpose::Brownian, 3, 11, 5);
    CounterRng other(7);
    (void)other.normal(Purpose::Brownian, 0, 0, 0);
    CHECK(other.normal(Purpose::Brownian, 3, 11, 5) == x);
    CHECK(rng.normal(Purpose::Brownian, 3, 12, 5) != x);
    CHECK(rng.normal(Purpose::Deviation, 3, 11, 5) != x);
    CHECK(CounterRng(8).normal(Purpose::Brownian, 3, 11, 5) != x);
}

TEST_CASE("normal stream moments") {
    const CounterRng rng(2024);
    NormalStream s(rng, Purpose::Brownian, 0, 0);
    const int n = 400000;
    double m1 = 0.0;
    double m2 = 0.0;
    double m4 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = s.next();
        m1 += x;
        m2 += x * x;
        m4 += x * x * x * x;
    }
    m1 /= n;
    m2 /= n;
    m4 /= n;
    CHECK(std::abs(m1) < 5.0 / std::sqrt(n));
    CHECK(std::abs(m2 - 1.0) < 5.0 * std::sqrt(2.0 / n));
    CHECK(std::abs(m4 - 3.0) < 5.0 * std::sqrt(96.0 / n));
}

TEST_CASE("streams of different firms are uncorrelated") {
    const CounterRng rng(5);
    NormalStream a(rng, Purpose::Brownian, 0, 0);
    NormalStream b(rng, Purpose::Brownian, 0, 1);
    const int n = 200000;
    double sxy = 0.0;
    for (int i = 0; i < n; ++i) sxy += a.next() * b.next();
    CHECK(std::abs(sxy / n) < 5.0 / std::sqrt(n));
}

TEST_CASE("box-muller pair matches its own definition") {
    const CounterRng rng(9);
    const auto [u1, u2] = rng.uniform_pair(Purpose::InitialOutput, 1, 2, 3);
    const auto [z1, z2] = rng.normal_pair(Purpose::InitialOutput, 1, 2, 3);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    CHECK(z1 == doctest::Approx(radius * std::cos(2.0 * M_PI * u2)).epsilon(1e-14));
    CHECK(z2 == doctest::Approx(radius * std::sin(2.0 * M_PI * u2)).epsilon(1e-14));
}

}
