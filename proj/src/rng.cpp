#include "fewmol/rng.hpp"

#include <cmath>
#include <numbers>

#include "fewmol/errors.hpp"

namespace fewmol {

double Rng::normal(double mu, double sigma) {
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    return mu + sigma * z;
}

int64_t Rng::below(int64_t n) {
    if (n <= 0) throw UsageError("Rng::below requires n > 0");
    const uint64_t un = static_cast<uint64_t>(n);
    const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return static_cast<int64_t>(x % un);
}

Rng Rng::fork(uint64_t stream) { return Rng(mix_seed(engine_(), stream)); }

std::vector<int64_t> Rng::sample_indices(int64_t n, int64_t k) {
    if (k > n) throw UsageError("sample_indices: k exceeds population");
    std::vector<int64_t> pool(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) pool[static_cast<size_t>(i)] = i;
    std::vector<int64_t> out;
    out.reserve(static_cast<size_t>(k));
    for (int64_t i = 0; i < k; ++i) {
        const int64_t j = i + below(n - i);
        std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
        out.push_back(pool[static_cast<size_t>(i)]);
    }
    return out;
}

uint64_t mix_seed(uint64_t a, uint64_t b) {
    uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace fewmol
