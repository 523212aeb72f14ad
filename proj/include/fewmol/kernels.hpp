#pragma once

#include <cstdint>
#include <vector>

namespace fewmol {

// Compressed sparse rows over node ids; used for undirected adjacency.
struct Csr {
    std::vector<int64_t> offsets;  // size n+1
    std::vector<int64_t> nbrs;
    int64_t n() const { return static_cast<int64_t>(offsets.size()) - 1; }
};

// Builds a symmetric CSR from undirected edges over n nodes. Neighbor lists
// are sorted so traversal order is independent of edge input order.
Csr build_csr(int64_t n, const std::vector<std::pair<int64_t, int64_t>>& edges);

}  // namespace fewmol

// Dense numeric kernels. Every kernel has a serial reference implementation
// and an OpenMP variant; the unqualified entry points dispatch by problem
// size. Parallel variants are written so results are bit-identical to the
// serial reference for any thread count: each output element is produced by
// exactly one thread using the same accumulation order as the serial loop.
namespace fewmol::kernels {

// Caps OpenMP worker count for all dispatched kernels and for callers that
// parallelize at a higher level. n <= 0 restores the hardware default.
void set_max_threads(int n);
int max_threads();

// Force-disable the parallel variants (serial reference only).
void set_parallel_enabled(bool on);
bool parallel_enabled();

namespace serial {
void matmul(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void vadd(const double* a, const double* b, double* c, int64_t n);
void vsub(const double* a, const double* b, double* c, int64_t n);
void vmul(const double* a, const double* b, double* c, int64_t n);
// out[v, :] = sum over u in nbrs(v) of x[u, :]
void csr_gather_sum(const double* x, double* out, const Csr& adj, int64_t d);
}  // namespace serial

namespace par {
void matmul(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void vadd(const double* a, const double* b, double* c, int64_t n);
void vsub(const double* a, const double* b, double* c, int64_t n);
void vmul(const double* a, const double* b, double* c, int64_t n);
void csr_gather_sum(const double* x, double* out, const Csr& adj, int64_t d);
}  // namespace par

void matmul(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void vadd(const double* a, const double* b, double* c, int64_t n);
void vsub(const double* a, const double* b, double* c, int64_t n);
void vmul(const double* a, const double* b, double* c, int64_t n);
void csr_gather_sum(const double* x, double* out, const Csr& adj, int64_t d);

}  // namespace fewmol::kernels
