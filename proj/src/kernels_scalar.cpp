#include "ddval/kernels.hpp"

namespace ddval::kernels::scalar {

double dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double squared_distance(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double alpha, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void row_squared_distances(const double* rows, std::size_t n_rows, std::size_t dim,
                           const double* q, double* out) {
    for (std::size_t r = 0; r < n_rows; ++r) {
        out[r] = squared_distance(rows + r * dim, q, dim);
    }
}

void block_squared_distances(const double* rows, std::size_t n_rows, std::size_t dim,
                             const double* const* queries, std::size_t n_queries, double* out) {
    // Row-outer loop: each row is read once per block and stays cached
    // across the queries.
    for (std::size_t r = 0; r < n_rows; ++r) {
        const double* row = rows + r * dim;
        for (std::size_t q = 0; q < n_queries; ++q) {
            out[q * n_rows + r] = squared_distance(row, queries[q], dim);
        }
    }
}

const Ops ops = {dot,   squared_distance,      axpy,
                 scale, row_squared_distances, block_squared_distances};

}  // namespace ddval::kernels::scalar
