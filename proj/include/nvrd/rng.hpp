#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace nvrd {

// splitmix64 step, used for mixing seeds into independent streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Deterministically derive a child seed from a parent seed and a tag.
// Same inputs give the same child on every platform.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t s = seed ^ (0x632be59bd9b4e019ull + tag * 0x9e3779b97f4a7c15ull);
    std::uint64_t a = splitmix64(s);
    std::uint64_t b = splitmix64(s);
    return a ^ (b << 1);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag1, std::uint64_t tag2) {
    return mix_seed(mix_seed(seed, tag1), tag2);
}

// Seeded generator with hand-rolled transforms. std::mt19937_64 produces a
// bit-exact sequence on every conforming implementation; the standard
// distributions do not, so uniform and normal draws are implemented here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t bits() { return eng_(); }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller. Two uniforms per draw, no cached spare,
    // so the stream position is a pure function of the draw count.
    double normal() {
        double u1 = 1.0 - uniform();  // (0, 1], keeps the log finite
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    // Uniform integer in [0, n). Rejection sampling keeps it unbiased.
    std::size_t index(std::size_t n) {
        if (n == 0) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = eng_();
        } while (x >= limit);
        return static_cast<std::size_t>(x % n);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct indices from [0, n), in random order. Requires k <= n.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
        std::vector<std::size_t> pool(n);
        for (std::size_t i = 0; i < n; ++i) pool[i] = i;
        for (std::size_t i = 0; i < k; ++i) {
            std::size_t j = i + index(n - i);
            std::swap(pool[i], pool[j]);
        }
        pool.resize(k);
        return pool;
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace nvrd
