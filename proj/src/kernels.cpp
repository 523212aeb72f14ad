#include "fewmol/kernels.hpp"

#include <algorithm>
#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fewmol/errors.hpp"

namespace fewmol {

Csr build_csr(int64_t n, const std::vector<std::pair<int64_t, int64_t>>& edges) {
    std::vector<std::vector<int64_t>> adj(static_cast<size_t>(n));
    for (const auto& [u, v] : edges) {
        if (u < 0 || v < 0 || u >= n || v >= n) throw UsageError("build_csr: node id out of range");
        adj[static_cast<size_t>(u)].push_back(v);
        adj[static_cast<size_t>(v)].push_back(u);
    }
    Csr csr;
    csr.offsets.resize(static_cast<size_t>(n) + 1, 0);
    for (int64_t i = 0; i < n; ++i) {
        std::sort(adj[static_cast<size_t>(i)].begin(), adj[static_cast<size_t>(i)].end());
        csr.offsets[static_cast<size_t>(i) + 1] =
            csr.offsets[static_cast<size_t>(i)] + static_cast<int64_t>(adj[static_cast<size_t>(i)].size());
    }
    csr.nbrs.reserve(static_cast<size_t>(csr.offsets.back()));
    for (const auto& row : adj) csr.nbrs.insert(csr.nbrs.end(), row.begin(), row.end());
    return csr;
}

}  // namespace fewmol

namespace fewmol::kernels {

namespace {
std::atomic<int> g_max_threads{0};
std::atomic<bool> g_parallel{true};

// Work below this many flops stays on the serial path; tiny problems lose
// more to fork/join than they gain.
constexpr int64_t kParallelFlopCutoff = 1 << 18;

bool use_parallel(int64_t flops) {
#ifdef _OPENMP
    return g_parallel.load() && flops >= kParallelFlopCutoff && max_threads() > 1;
#else
    (void)flops;
    return false;
#endif
}
}  // namespace

void set_max_threads(int n) {
    g_max_threads.store(n);
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#endif
}

int max_threads() {
    const int n = g_max_threads.load();
    if (n > 0) return n;
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void set_parallel_enabled(bool on) { g_parallel.store(on); }
bool parallel_enabled() { return g_parallel.load(); }

namespace serial {

void matmul(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        for (int64_t j = 0; j < n; ++j) ci[j] = 0.0;
        const double* ai = a + i * k;
        for (int64_t p = 0; p < k; ++p) {
            const double aip = ai[p];
            const double* bp = b + p * n;
            for (int64_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

void vadd(const double* a, const double* b, double* c, int64_t n) {
    for (int64_t i = 0; i < n; ++i) c[i] = a[i] + b[i];
}

void vsub(const double* a, const double* b, double* c, int64_t n) {
    for (int64_t i = 0; i < n; ++i) c[i] = a[i] - b[i];
}

void vmul(const double* a, const double* b, double* c, int64_t n) {
    for (int64_t i = 0; i < n; ++i) c[i] = a[i] * b[i];
}

void csr_gather_sum(const double* x, double* out, const Csr& adj, int64_t d) {
    const int64_t n = adj.n();
    for (int64_t v = 0; v < n; ++v) {
        double* ov = out + v * d;
        for (int64_t j = 0; j < d; ++j) ov[j] = 0.0;
        for (int64_t e = adj.offsets[static_cast<size_t>(v)]; e < adj.offsets[static_cast<size_t>(v) + 1]; ++e) {
            const double* xu = x + adj.nbrs[static_cast<size_t>(e)] * d;
            for (int64_t j = 0; j < d; ++j) ov[j] += xu[j];
        }
    }
}

}  // namespace serial

namespace par {

void matmul(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        for (int64_t j = 0; j < n; ++j) ci[j] = 0.0;
        const double* ai = a + i * k;
        for (int64_t p = 0; p < k; ++p) {
            const double aip = ai[p];
            const double* bp = b + p * n;
            for (int64_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

void vadd(const double* a, const double* b, double* c, int64_t n) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) c[i] = a[i] + b[i];
}

void vsub(const double* a, const double* b, double* c, int64_t n) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) c[i] = a[i] - b[i];
}

void vmul(const double* a, const double* b, double* c, int64_t n) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) c[i] = a[i] * b[i];
}

void csr_gather_sum(const double* x, double* out, const Csr& adj, int64_t d) {
    const int64_t n = adj.n();
#pragma omp parallel for schedule(static)
    for (int64_t v = 0; v < n; ++v) {
        double* ov = out + v * d;
        for (int64_t j = 0; j < d; ++j) ov[j] = 0.0;
        for (int64_t e = adj.offsets[static_cast<size_t>(v)]; e < adj.offsets[static_cast<size_t>(v) + 1]; ++e) {
            const double* xu = x + adj.nbrs[static_cast<size_t>(e)] * d;
            for (int64_t j = 0; j < d; ++j) ov[j] += xu[j];
        }
    }
}

}  // namespace par

void matmul(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
    if (use_parallel(m * k * n)) {
        par::matmul(a, b, c, m, k, n);
    } else {
        serial::matmul(a, b, c, m, k, n);
    }
}

void vadd(const double* a, const double* b, double* c, int64_t n) {
    if (use_parallel(n)) {
        par::vadd(a, b, c, n);
    } else {
        serial::vadd(a, b, c, n);
    }
}

void vsub(const double* a, const double* b, double* c, int64_t n) {
    if (use_parallel(n)) {
        par::vsub(a, b, c, n);
    } else {
        serial::vsub(a, b, c, n);
    }
}

void vmul(const double* a, const double* b, double* c, int64_t n) {
    if (use_parallel(n)) {
        par::vmul(a, b, c, n);
    } else {
        serial::vmul(a, b, c, n);
    }
}

void csr_gather_sum(const double* x, double* out, const Csr& adj, int64_t d) {
    if (use_parallel(static_cast<int64_t>(adj.nbrs.size()) * d)) {
        par::csr_gather_sum(x, out, adj, d);
    } else {
        serial::csr_gather_sum(x, out, adj, d);
    }
}

}  // namespace fewmol::kernels
