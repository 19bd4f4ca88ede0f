#pragma once

#include <cstdint>

namespace gmbt {

/// Splitmix64 generator. The standard engines are portable but the standard
/// distributions are not, and run reports must be reproducible bit-for-bit
/// across toolchains, so bounded draws are implemented here as well.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform draw in [0, bound). bound must be nonzero.
    std::uint64_t below(std::uint64_t bound) {
        // Debiased multiply-shift (Lemire).
        while (true) {
            std::uint64_t x = next();
            __uint128_t m = static_cast<__uint128_t>(x) * bound;
            auto low = static_cast<std::uint64_t>(m);
            if (low >= bound || low >= (-bound) % bound) {
                return static_cast<std::uint64_t>(m >> 64);
            }
        }
    }

private:
    std::uint64_t state_ = 0;
};

/// Derives the per-test generator so that skipping or aborting one test never
/// perturbs the random choices of a later one.
inline SplitMix64 per_test_rng(std::uint64_t seed, std::uint64_t test_index) {
    SplitMix64 mix(seed ^ (0x6a09e667f3bcc909ull + test_index * 0x9e3779b97f4a7c15ull));
    mix.next();
    return mix;
}

}  // namespace gmbt
