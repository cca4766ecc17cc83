#pragma once

// Deterministic RNG used by the workload generators, hint corruption and the
// sync simulator. splitmix64 over a seed; substreams are derived by hashing
// (seed, tag, index) so streams never depend on call interleaving.

#include "chiron/types.hpp"

#include <cmath>
#include <span>
#include <string_view>

namespace chiron {

class DetRng {
public:
    explicit DetRng(std::uint64_t seed) : state_(seed) {}

    // Independent substream: same (seed, tag, index) always yields the same
    // stream, no matter what was drawn before.
    static DetRng substream(std::uint64_t seed, std::string_view tag, std::uint64_t index)
    {
        std::uint64_t h = fnv1a64_u64(seed, kFnvOffset);
        h = fnv1a64({reinterpret_cast<const std::uint8_t*>(tag.data()), tag.size()}, h);
        h = fnv1a64_u64(index, h);
        return DetRng(h);
    }

    std::uint64_t next()
    {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t below(std::uint64_t bound) { return bound ? next() % bound : 0; }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) / 9007199254740992.0; }

    bool chance(double p) { return uniform() < p; }

    // Log-uniform integer in [lo, hi], both >= 1.
    std::uint64_t log_uniform(std::uint64_t lo, std::uint64_t hi)
    {
        double loglo = std::log(static_cast<double>(lo));
        double loghi = std::log(static_cast<double>(hi));
        auto v = static_cast<std::uint64_t>(std::exp(loglo + uniform() * (loghi - loglo)));
        return v < lo ? lo : (v > hi ? hi : v);
    }

    template <typename T> void shuffle(std::span<T> items)
    {
        for (std::size_t i = items.size(); i > 1; --i)
            std::swap(items[i - 1], items[below(i)]);
    }

private:
    std::uint64_t state_;
};

} // namespace chiron
