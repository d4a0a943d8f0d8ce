#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace sticky::rng {

/// Philox4x32-10 block function (Salmon et al., "Parallel random numbers:
/// as easy as 1, 2, 3"). Stateless: the output is a pure function of the
/// 128-bit counter and the 64-bit key.
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr Counter apply(Counter ctr, Key key) noexcept {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kW0;
                key[1] += kW1;
            }
            const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kM0 = 0xD2511F53u;
    static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kW0 = 0x9E3779B9u;
    static constexpr std::uint32_t kW1 = 0xBB67AE85u;
};

/// Independent sub-streams carved out of one master seed.
enum class Purpose : std::uint32_t {
    InitialOutput = 0,
    Brownian = 1,
    Deviation = 2,
    GainSample = 3,
};

/// Addressable random numbers: every draw is identified by
/// (purpose, replication, firm, index), so a firm's noise does not depend on
/// how many other firms exist or in which order replications run.
class CounterRng {
public:
    explicit constexpr CounterRng(std::uint64_t seed) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

    [[nodiscard]] Philox4x32::Counter bits(Purpose purpose, std::uint32_t replication,
                                           std::uint32_t firm, std::uint32_t block) const noexcept {
        return Philox4x32::apply({block, firm, replication, static_cast<std::uint32_t>(purpose)}, key_);
    }

    /// Two uniforms in (0, 1] with 53-bit resolution.
    [[nodiscard]] std::pair<double, double> uniform_pair(Purpose purpose, std::uint32_t replication,
                                                         std::uint32_t firm,
                                                         std::uint32_t block) const noexcept {
        const auto w = bits(purpose, replication, firm, block);
        return {to_unit((std::uint64_t{w[0]} << 32) | w[1]), to_unit((std::uint64_t{w[2]} << 32) | w[3])};
    }

    /// Two independent standard normals (Box-Muller).
    [[nodiscard]] std::pair<double, double> normal_pair(Purpose purpose, std::uint32_t replication,
                                                        std::uint32_t firm,
                                                        std::uint32_t block) const noexcept {
        const auto [u1, u2] = uniform_pair(purpose, replication, firm, block);
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        return {radius * std::cos(angle), radius * std::sin(angle)};
    }

    /// The index-th standard normal of a stream.
    [[nodiscard]] double normal(Purpose purpose, std::uint32_t replication, std::uint32_t firm,
                                std::uint32_t index) const noexcept {
        const auto pair = normal_pair(purpose, replication, firm, index / 2);
        return (index % 2 == 0) ? pair.first : pair.second;
    }

private:
    static constexpr double to_unit(std::uint64_t x) noexcept {
        return static_cast<double>((x >> 11) + 1) * 0x1.0p-53;
    }

    Philox4x32::Key key_;
};

/// Sequential reader over one (purpose, replication, firm) stream. Uses the
/// polar method on 32-bit uniforms: each block yields up to four normals.
class NormalStream {
public:
    NormalStream(const CounterRng& rng, Purpose purpose, std::uint32_t replication, std::uint32_t firm) noexcept
        : rng_(&rng), purpose_(purpose), replication_(replication), firm_(firm) {}

    double next() noexcept {
        while (head_ == count_) refill();
        return buf_[head_++];
    }

private:
    void refill() noexcept {
        head_ = 0;
        count_ = 0;
        const auto w = rng_->bits(purpose_, replication_, firm_, block_++);
        for (int pair = 0; pair < 2; ++pair) {
            const double x = 2.0 * to_unit32(w[2 * pair]) - 1.0;
            const double y = 2.0 * to_unit32(w[2 * pair + 1]) - 1.0;
            const double s = x * x + y * y;
            if (s >= 1.0 || s == 0.0) continue;
            const double f = std::sqrt(-2.0 * std::log(s) / s);
            buf_[count_++] = x * f;
            buf_[count_++] = y * f;
        }
    }

    static constexpr double to_unit32(std::uint32_t x) noexcept {
        return (static_cast<double>(x) + 0.5) * 0x1.0p-32;
    }

    const CounterRng* rng_;
    Purpose purpose_;
    std::uint32_t replication_;
    std::uint32_t firm_;
    std::uint32_t block_ = 0;
    std::array<double, 4> buf_{};
    int head_ = 0;
    int count_ = 0;
};

}  // namespace sticky::rng
