#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace fewmol {

// Deterministic random source. Wraps mt19937_64 but derives all variates with
// fixed in-house algorithms so streams are reproducible bit-for-bit for a
// given seed, independent of the standard library's distribution internals.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Strictly inside (0, 1).
    double uniform01() {
        const uint64_t x = engine_() >> 11;
        return (static_cast<double>(x) + 0.5) * (1.0 / 9007199254740992.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller; two uniforms consumed per variate.
    double normal(double mu, double sigma);

    // Unbiased integer in [0, n). n must be positive.
    int64_t below(int64_t n);

    // Child stream derived from this one; advancing the child never touches
    // the parent state beyond the single draw made here.
    Rng fork(uint64_t stream);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int64_t i = static_cast<int64_t>(v.size()) - 1; i > 0; --i) {
            std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(below(i + 1))]);
        }
    }

    // k distinct indices drawn uniformly from [0, n), in draw order.
    std::vector<int64_t> sample_indices(int64_t n, int64_t k);

private:
    std::mt19937_64 engine_;
};

// SplitMix64 finalizer; used for seed derivation.
uint64_t mix_seed(uint64_t a, uint64_t b);

}  // namespace fewmol
