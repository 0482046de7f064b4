// Seeded random number generation with fully pinned-down sampling routines
// so runs are reproducible bit-for-bit across platforms.
#pragma once

#include <cstdint>
#include <random>

namespace ebt {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Unbiased integer in [0, n), n >= 1. Rejection sampling on the top bits.
    std::uint64_t uniform_index(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = eng_();
        while (v >= limit) v = eng_();
        return v % n;
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Derives an independent, deterministic child stream.
    Rng fork() { return Rng(eng_() ^ 0x9e3779b97f4a7c15ull); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[uniform_index(i)]);
        }
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace ebt
