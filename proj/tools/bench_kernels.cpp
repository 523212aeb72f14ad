// Compares the serial reference kernels against the OpenMP variants and
// reports throughput plus a bit-exactness check. The parallel kernels are
// written so any thread count reproduces the serial results exactly; this
// binary doubles as a quick sanity check of that property on real sizes.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "fewmol/kernels.hpp"
#include "fewmol/rng.hpp"

using namespace fewmol;

namespace {

using Clock = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm-up
    const auto t0 = Clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

bool identical(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

int main(int argc, char** argv) {
    int threads = 0;
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--threads") threads = std::atoi(argv[i + 1]);
    }
    if (threads > 0) kernels::set_max_threads(threads);
    std::printf("threads: %d\n", kernels::max_threads());
    std::printf("%-28s %10s %10s %8s %6s\n", "kernel", "serial ms", "openmp ms", "speedup", "exact");

    Rng rng(42);
    auto fill = [&](std::vector<double>& v) {
        for (double& x : v) x = rng.uniform(-1, 1);
    };

    for (int64_t n : {512, 2048, 8192, 24576}) {
        const int64_t k = 32, m = 32;
        std::vector<double> a(static_cast<size_t>(n * k)), b(static_cast<size_t>(k * m));
        std::vector<double> c1(static_cast<size_t>(n * m)), c2(c1.size());
        fill(a);
        fill(b);
        const int reps = n <= 2048 ? 50 : 10;
        const double ts = time_ms([&] { kernels::serial::matmul(a.data(), b.data(), c1.data(), n, k, m); }, reps);
        const double tp = time_ms([&] { kernels::par::matmul(a.data(), b.data(), c2.data(), n, k, m); }, reps);
        std::printf("%-28s %10.3f %10.3f %8.2fx %6s\n",
                    ("matmul [" + std::to_string(n) + "x32]@[32x32]").c_str(), ts, tp, ts / tp,
                    identical(c1, c2) ? "yes" : "NO");
    }

    for (int64_t n : {1 << 16, 1 << 20}) {
        std::vector<double> a(static_cast<size_t>(n)), b(a.size()), c1(a.size()), c2(a.size());
        fill(a);
        fill(b);
        const double ts = time_ms([&] { kernels::serial::vmul(a.data(), b.data(), c1.data(), n); }, 50);
        const double tp = time_ms([&] { kernels::par::vmul(a.data(), b.data(), c2.data(), n); }, 50);
        std::printf("%-28s %10.3f %10.3f %8.2fx %6s\n",
                    ("vmul n=" + std::to_string(n)).c_str(), ts, tp, ts / tp,
                    identical(c1, c2) ? "yes" : "NO");
    }

    {
        const int64_t n = 4096, d = 32;
        Rng erng(7);
        std::vector<std::pair<int64_t, int64_t>> edges;
        for (int64_t i = 0; i < n * 8; ++i) {
            int64_t u = erng.below(n), v = erng.below(n);
            if (u != v) edges.emplace_back(std::min(u, v), std::max(u, v));
        }
        const Csr adj = build_csr(n, edges);
        std::vector<double> x(static_cast<size_t>(n * d)), o1(x.size()), o2(x.size());
        fill(x);
        const double ts = time_ms([&] { kernels::serial::csr_gather_sum(x.data(), o1.data(), adj, d); }, 20);
        const double tp = time_ms([&] { kernels::par::csr_gather_sum(x.data(), o2.data(), adj, d); }, 20);
        std::printf("%-28s %10.3f %10.3f %8.2fx %6s\n", "csr_gather_sum [4096x32]", ts, tp, ts / tp,
                    identical(o1, o2) ? "yes" : "NO");
    }
    return 0;
}
