#pragma once

#include <cstddef>
#include <string_view>

// Arithmetic inner loops shared by the valuation core and the model. Each
// kernel has a scalar reference implementation and, on x86-64, an AVX2
// variant; the active set is chosen once at load time from CPUID. The two
// variants are equivalence-tested against each other.
namespace ddval::kernels {

struct Ops {
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*squared_distance)(const double* a, const double* b, std::size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    void (*scale)(double alpha, double* x, std::size_t n);
    // out[i] = squared_distance(rows + i*dim, q, dim) for i in [0, n_rows)
    void (*row_squared_distances)(const double* rows, std::size_t n_rows, std::size_t dim,
                                  const double* q, double* out);
    // out[q * n_rows + r] = squared_distance(row r, queries[q]); one pass
    // over the row matrix for the whole query block.
    void (*block_squared_distances)(const double* rows, std::size_t n_rows, std::size_t dim,
                                    const double* const* queries, std::size_t n_queries,
                                    double* out);
};

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double alpha, double* x, std::size_t n);
void row_squared_distances(const double* rows, std::size_t n_rows, std::size_t dim,
                           const double* q, double* out);
void block_squared_distances(const double* rows, std::size_t n_rows, std::size_t dim,
                             const double* const* queries, std::size_t n_queries, double* out);
extern const Ops ops;
}  // namespace scalar

#ifdef DDVAL_BUILD_AVX2
namespace avx2 {
extern const Ops ops;
}
#endif

// Kernel set active for this process (scalar unless AVX2 is compiled in and
// the CPU supports it).
const Ops& active();
std::string_view active_name();

inline double dot(const double* a, const double* b, std::size_t n) {
    return active().dot(a, b, n);
}
inline double squared_distance(const double* a, const double* b, std::size_t n) {
    return active().squared_distance(a, b, n);
}
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
    active().axpy(alpha, x, y, n);
}
inline void scale(double alpha, double* x, std::size_t n) {
    active().scale(alpha, x, n);
}
inline void row_squared_distances(const double* rows, std::size_t n_rows, std::size_t dim,
                                  const double* q, double* out) {
    active().row_squared_distances(rows, n_rows, dim, q, out);
}
inline void block_squared_distances(const double* rows, std::size_t n_rows, std::size_t dim,
                                    const double* const* queries, std::size_t n_queries,
                                    double* out) {
    active().block_squared_distances(rows, n_rows, dim, queries, n_queries, out);
}

}  // namespace ddval::kernels
