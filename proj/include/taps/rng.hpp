#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

#include "taps/common.hpp"

namespace taps {

// All randomness in the artifact flows through this header. The engine is
// std::mt19937_64, whose output sequence is fixed by the C++ standard, and
// the distributions below are written out explicitly instead of using
// <random>'s (which are implementation-defined). Together with the seed
// derivation scheme this makes every result stream reproducible from
// (base_seed, index) in any conforming implementation.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Seed for the index-th independent stream under a base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    return splitmix64(base ^ splitmix64(index + 1));
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1) with 53 bits of precision.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [0, n). Multiply-shift; the bias of ~n/2^64 is irrelevant
    // at the ranges used here and the mapping is exactly reproducible.
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    bool bernoulli(double p) { return next_unit() < p; }

    // Index drawn proportionally to the (nonnegative) weights.
    std::size_t weighted_index(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        if (!(total > 0.0)) throw ArgumentError("weighted_index: no positive weight");
        double r = next_unit() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (r < acc) return i;
        }
        return weights.size() - 1;
    }

    // Poisson via CDF inversion; fine for the small means used by map
    // generation. Capped so pathological u cannot loop.
    std::uint32_t poisson(double mean, std::uint32_t cap) {
        if (mean <= 0.0) return 0;
        double u = next_unit();
        double p = std::exp(-mean);
        double cdf = p;
        std::uint32_t k = 0;
        while (u > cdf && k < cap) {
            ++k;
            p *= mean / k;
            cdf += p;
        }
        return k;
    }

  private:
    std::mt19937_64 eng_;
};

// Stateless helpers for "random function" style decisions, used where a
// value must be reproducible regardless of evaluation order (lazy adversary
// assignments, procedural link sets).
inline double hash_unit(std::uint64_t seed, std::uint64_t key) {
    return static_cast<double>(splitmix64(seed ^ splitmix64(key)) >> 11) * 0x1.0p-53;
}

inline bool hash_bernoulli(std::uint64_t seed, std::uint64_t key, double p) {
    return hash_unit(seed, key) < p;
}

}  // namespace taps
