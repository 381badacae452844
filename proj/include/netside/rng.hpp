#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "netside/errors.hpp"

namespace netside {

// splitmix64 round, used to derive independent substream seeds from a master seed
// plus a tag. Every generator and evaluator draws from its own substream so that
// adding a consumer never shifts the values another consumer sees.
inline uint64_t mix_seed(uint64_t seed, uint64_t tag) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t mix_seed(uint64_t seed, uint64_t a, uint64_t b) {
    return mix_seed(mix_seed(seed, a), b);
}

// Seeded random stream. The transforms on top of mt19937_64 are written out by
// hand (instead of std::*_distribution) so that a seed produces the same stream
// on every standard library implementation.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    // uniform in [0, 1)
    double uniform() {
        return (gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // inclusive bounds
    int64_t uniform_int(int64_t lo, int64_t hi) {
        if (hi < lo) throw UsageError("uniform_int: empty range");
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        // rejection sampling to avoid modulo bias
        uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        uint64_t v;
        do {
            v = gen_();
        } while (v >= limit);
        return lo + static_cast<int64_t>(v % span);
    }

    double normal(double mean = 0.0, double stdev = 1.0) {
        // Box-Muller; the second value of the pair is discarded to keep the
        // stream position a simple function of the draw count.
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stdev * r * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    // exponential with given rate (events per unit)
    double exponential(double rate) {
        double u = uniform();
        while (u <= 0.0) u = uniform();
        return -std::log(u) / rate;
    }

    // exact Poisson sampler; large means are split via superposition so the
    // Knuth product never underflows
    long poisson(double mean) {
        if (mean <= 0.0) return 0;
        if (mean > 30.0) {
            double half = mean / 2.0;
            return poisson(half) + poisson(mean - half);
        }
        double limit = std::exp(-mean);
        long n = 0;
        double prod = uniform();
        while (prod > limit) {
            ++n;
            prod *= uniform();
        }
        return n;
    }

    // index into a discrete distribution given by (value, probability) weights
    template <typename T>
    size_t weighted_index(const std::vector<std::pair<T, double>>& dist) {
        double total = 0.0;
        for (const auto& [v, p] : dist) total += p;
        if (total <= 0.0) throw UsageError("weighted_index: non-positive weight sum");
        double x = uniform() * total;
        double acc = 0.0;
        for (size_t i = 0; i < dist.size(); ++i) {
            acc += dist[i].second;
            if (x < acc) return i;
        }
        return dist.size() - 1;
    }

    // Fisher-Yates, implementation-independent (std::shuffle is not portable
    // across standard libraries)
    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.empty()) return;
        for (size_t i = v.size() - 1; i > 0; --i) {
            size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i)));
            std::swap(v[i], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

} // namespace netside
