// AVX2 kernel variants. This translation unit is the only one built with
// -mavx2 -mfma; callers must go through the runtime dispatch in kernels.cpp.

#include <immintrin.h>

#include "ddval/kernels.hpp"

namespace ddval::kernels::avx2 {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

double dot(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    }
    double sum = hsum(acc);
    for (; i < n; ++i) sum += a[i] * b[i];
    return sum;
}

double squared_distance(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double sum = hsum(acc);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return sum;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i),
                                                _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double alpha, double* x, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    }
    for (; i < n; ++i) x[i] *= alpha;
}

void row_squared_distances(const double* rows, std::size_t n_rows, std::size_t dim,
                           const double* q, double* out) {
    for (std::size_t r = 0; r < n_rows; ++r) {
        out[r] = squared_distance(rows + r * dim, q, dim);
    }
}

void block_squared_distances(const double* rows, std::size_t n_rows, std::size_t dim,
                             const double* const* queries, std::size_t n_queries, double* out) {
    for (std::size_t r = 0; r < n_rows; ++r) {
        const double* row = rows + r * dim;
        for (std::size_t q = 0; q < n_queries; ++q) {
            out[q * n_rows + r] = squared_distance(row, queries[q], dim);
        }
    }
}

}  // namespace

const Ops ops = {dot,   squared_distance,      axpy,
                 scale, row_squared_distances, block_squared_distances};

}  // namespace ddval::kernels::avx2
