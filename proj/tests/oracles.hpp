// Test-only oracles, independent of the library's computation paths.
#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "sddql/sparse.hpp"

namespace oracles {

// Dense row-major copy of a sparse matrix.
inline std::vector<double> to_dense(const sddql::SparseMatrix& m) {
    std::vector<double> d(static_cast<size_t>(m.rows) * m.cols, 0.0);
    for (int r = 0; r < m.rows; ++r)
        for (int k = m.row_offsets[r]; k < m.row_offsets[r + 1]; ++k)
            d[static_cast<size_t>(r) * m.cols + m.col_indices[k]] = m.values[k];
    return d;
}

inline std::vector<double> dense_matvec(const std::vector<double>& d, int rows, int cols,
                                        const std::vector<double>& v) {
    std::vector<double> out(rows, 0.0);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) out[r] += d[static_cast<size_t>(r) * cols + c] * v[c];
    return out;
}

// Dense transpose, the oracle for spmv_transpose and symmetry checks.
inline std::vector<double> dense_transpose(const std::vector<double>& d, int rows, int cols) {
    std::vector<double> out(d.size());
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            out[static_cast<size_t>(c) * rows + r] = d[static_cast<size_t>(r) * cols + c];
    return out;
}

inline double rel_l2_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline std::vector<double> random_vector(std::mt19937_64& rng, size_t n, double lo, double hi) {
    std::vector<double> v(n);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (auto& x : v) x = dist(rng);
    return v;
}

// Random rectangular sparse matrix with ~density fraction of nonzeros.
inline sddql::SparseMatrix random_sparse(std::mt19937_64& rng, int rows, int cols,
                                         double density) {
    sddql::SparseBuilder builder(rows, cols);
    std::uniform_real_distribution<double> val(-5.0, 5.0);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            if (coin(rng) < density) builder.add(r, c, val(rng));
    return builder.build();
}

}  // namespace oracles
