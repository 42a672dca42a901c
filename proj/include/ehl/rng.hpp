#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>

namespace ehl {

/// Every stochastic routine in the library draws from this engine type.
using Rng = std::mt19937_64;

namespace detail {

constexpr std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace detail

/// Seed of the named substream of `master`: splitmix64(master XOR fnv1a64(name)).
/// Distinct names give statistically independent engines; the mapping is
/// stable across platforms and releases.
constexpr std::uint64_t substream_seed(std::uint64_t master, std::string_view name) noexcept {
    return detail::splitmix64(master ^ detail::fnv1a64(name));
}

inline Rng substream(std::uint64_t master, std::string_view name) {
    return Rng{substream_seed(master, name)};
}

/// Uniform double in [0, 1) from the top 53 bits of one engine output.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// One Rayleigh(zeta) draw by inversion. Consumes exactly one engine output.
inline double sample_channel(double zeta, Rng& rng) {
    if (!(zeta > 0.0) || !std::isfinite(zeta)) {
        throw std::domain_error("sample_channel: scale must be positive and finite");
    }
    const double u = uniform01(rng);
    return zeta * std::sqrt(-2.0 * std::log1p(-u));
}

/// Poisson bit count with mean rate * slot_duration.
inline double sample_arrivals(double rate, double slot_duration, Rng& rng) {
    if (!(rate >= 0.0) || !std::isfinite(rate)) {
        throw std::domain_error("sample_arrivals: rate must be non-negative and finite");
    }
    if (!(slot_duration > 0.0)) {
        throw std::domain_error("sample_arrivals: slot duration must be positive");
    }
    const double mean = rate * slot_duration;
    if (mean == 0.0) {
        return 0.0;
    }
    std::poisson_distribution<long long> dist(mean);
    return static_cast<double>(dist(rng));
}

} // namespace ehl
