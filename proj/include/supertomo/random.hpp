#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace supertomo {

/**
 * Seeded 64-bit generator (std::mt19937_64) with portable uniform and Poisson
 * samplers. The standard distributions are implementation-defined, so the
 * samplers here are written out to keep runs reproducible across toolchains.
 *
 * Poisson: inversion by sequential search for mean < 10, and Hormann's PTRS
 * transformed rejection for larger means.
 */
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound) {
        // Lemire's rejection keeps the draw unbiased.
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t r = engine_();
            if (r >= threshold) return r % bound;
        }
    }

    std::uint64_t poisson(double mean) {
        if (!(mean > 0.0)) return 0;
        return mean < 10.0 ? poisson_inversion(mean) : poisson_ptrs(mean);
    }

    template <typename It>
    void shuffle(It first, It last) {
        const auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i) {
            const auto j = below(i);
            std::swap(first[i - 1], first[j]);
        }
    }

  private:
    std::uint64_t poisson_inversion(double mean) {
        double p = std::exp(-mean);
        double cdf = p;
        const double u = uniform();
        std::uint64_t k = 0;
        while (u > cdf) {
            ++k;
            p *= mean / static_cast<double>(k);
            cdf += p;
            if (p == 0.0 && cdf < u) break; // tail underflow, accept current k
        }
        return k;
    }

    std::uint64_t poisson_ptrs(double mean) {
        const double slam = std::sqrt(mean);
        const double loglam = std::log(mean);
        const double b = 0.931 + 2.53 * slam;
        const double a = -0.059 + 0.02483 * b;
        const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
        const double vr = 0.9277 - 3.6224 / (b - 2.0);
        for (;;) {
            const double U = uniform() - 0.5;
            const double V = uniform();
            const double us = 0.5 - std::abs(U);
            const double k = std::floor((2.0 * a / us + b) * U + mean + 0.43);
            if (us >= 0.07 && V <= vr) return static_cast<std::uint64_t>(k);
            if (k < 0.0 || (us < 0.013 && V > us)) continue;
            if (std::log(V) + std::log(invalpha) - std::log(a / (us * us) + b) <=
                -mean + k * loglam - std::lgamma(k + 1.0))
                return static_cast<std::uint64_t>(k);
        }
    }

    std::mt19937_64 engine_;
};

/// SplitMix64 finaliser; used to derive independent child seeds.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace supertomo
