#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

#include "eegrag/hash.hpp"

namespace eegrag {

// Deterministic RNG with named substreams.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the
// standard; all distributions are implemented here because the standard
// library ones are implementation-defined. Every random decision in the
// pipeline draws from a substream derived from one root seed, so results
// are reproducible bit-for-bit across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), gen_(mix64(seed)) {}

    std::uint64_t seed() const { return seed_; }

    // Child stream; independent of how much this stream has been consumed.
    Rng substream(std::string_view name) const {
        return Rng(mix64(seed_ ^ fnv1a64(name)));
    }
    Rng substream(std::string_view name, std::uint64_t index) const {
        return Rng(mix64(seed_ ^ fnv1a64(index, fnv1a64(name))));
    }

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller (no cached spare, keeps state trivial).
    double gaussian() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.28318530717958647692 * u2);
    }

    // Unbiased integer in [0, n) by rejection.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = gen_();
        while (x >= limit) x = gen_();
        return x % n;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

    // Random permutation of 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = i;
        shuffle(p);
        return p;
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;
};

} // namespace eegrag
