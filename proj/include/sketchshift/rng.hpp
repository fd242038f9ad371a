#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>

namespace sketchshift {

/// SplitMix64. Every stochastic step in the library draws from this
/// generator so that results are reproducible across platforms and
/// standard-library implementations.
class SplitMix64 {
public:
    constexpr explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    constexpr std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    constexpr double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform in [0, n); n must be positive. Rejection sampling, no modulo bias.
    constexpr std::uint64_t below(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next();
            if (r >= threshold) return r % n;
        }
    }

    /// Standard normal via Box-Muller (test fixtures and synthetic data).
    double normal();

private:
    std::uint64_t state_;
};

/// Mixes several words into one seed; order-sensitive.
constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = 0x6a09e667f3bcc909ull;
    for (auto p : parts) {
        SplitMix64 g(h ^ p);
        h = g.next();
    }
    return h;
}

}  // namespace sketchshift
