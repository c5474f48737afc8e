#pragma once

#include <cassert>
#include <cstdint>
#include <random>
#include <span>

namespace topicbp {

// splitmix64 finalizer; used to derive independent component seeds from the
// single run seed so that e.g. fold assignment and message initialization
// never share a stream.
inline uint64_t mix_seed(uint64_t seed, uint64_t tag) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ull * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Component tags for mix_seed.
enum class SeedTag : uint64_t {
    message_init = 1,
    token_init = 2,
    folds = 3,
    holdout_split = 4,
    negative_sampling = 5,
    classifier_split = 6,
    fold_in = 7,
    gs_sampling = 8,
};

inline uint64_t derive_seed(uint64_t seed, SeedTag tag) {
    return mix_seed(seed, static_cast<uint64_t>(tag));
}

// Deterministic RNG. mt19937_64 is fully specified by the standard; the
// uniform generators below avoid std::uniform_*_distribution because those
// are implementation-defined and would break cross-platform reproducibility.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    // Uniform on the open interval (0, 1).
    double uniform01() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Uniform integer in [0, n).
    uint64_t uniform_int(uint64_t n) {
        assert(n > 0);
        // rejection to avoid modulo bias
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    uint64_t raw() { return engine_(); }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (size_t i = items.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(uniform_int(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// Draws an index with probability proportional to weights[i]. Weights must be
// nonnegative with a positive sum; a single uniform draw walks the running sum.
inline int32_t sample_categorical(std::span<const double> weights, Rng& rng) {
    double total = 0.0;
    for (double w : weights) total += w;
    const double u = rng.uniform01() * total;
    double acc = 0.0;
    for (size_t k = 0; k + 1 < weights.size(); ++k) {
        acc += weights[k];
        if (u < acc) return static_cast<int32_t>(k);
    }
    return static_cast<int32_t>(weights.size() - 1);
}

}  // namespace topicbp
