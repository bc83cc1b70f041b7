#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

#include "ssrl/errors.hpp"

namespace ssrl {

// Deterministic RNG wrapper. mt19937_64 has a fully specified output sequence,
// and the distribution helpers below are hand-rolled so results do not depend
// on the standard library's (unspecified) distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    // Derives an independent stream from a master seed and a structured path,
    // e.g. derive(seed, {kStreamRl, batch, query_index, rollout_index}).
    static Rng derive(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
        std::uint64_t x = master;
        for (std::uint64_t p : path) {
            x = splitmix(x ^ (p + 0x9e3779b97f4a7c15ULL));
        }
        return Rng(splitmix(x));
    }

    std::uint64_t next() { return eng_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t integer(std::uint64_t n) {
        if (n == 0) throw InternalError("Rng::integer: empty range");
        // Rejection sampling to avoid modulo bias.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = eng_();
        while (x >= limit) x = eng_();
        return x % n;
    }

    // Samples an index from an (approximately normalized) probability vector
    // by CDF walk; the final index with nonzero mass absorbs rounding slack.
    template <typename Scalar>
    int categorical(std::span<const Scalar> probs) {
        if (probs.empty()) throw InternalError("Rng::categorical: empty distribution");
        const double u = uniform();
        double cdf = 0.0;
        int last_nonzero = 0;
        for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
            const double p = static_cast<double>(probs[i]);
            if (p > 0.0) last_nonzero = i;
            cdf += p;
            if (u < cdf) return i;
        }
        return last_nonzero;
    }

    template <typename It>
    void shuffle(It first, It last) {
        const auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i) {
            std::swap(first[i - 1], first[integer(i)]);
        }
    }

private:
    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::mt19937_64 eng_;
};

// Stream tags for Rng::derive paths.
inline constexpr std::uint64_t kStreamInit = 1;
inline constexpr std::uint64_t kStreamShuffle = 2;
inline constexpr std::uint64_t kStreamSl = 3;
inline constexpr std::uint64_t kStreamRl = 4;
inline constexpr std::uint64_t kStreamSynthetic = 5;

}  // namespace ssrl
