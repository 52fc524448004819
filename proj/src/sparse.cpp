#include "sddql/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace sddql {

void SparseBuilder::add(int row, int col, double value) {
    if (row < 0 || row >= rows_ || col < 0 || col >= cols_)
        throw std::out_of_range("SparseBuilder: index out of range");
    r_.push_back(row);
    c_.push_back(col);
    v_.push_back(value);
}

SparseMatrix SparseBuilder::build() const {
    SparseMatrix m;
    m.rows = rows_;
    m.cols = cols_;
    m.row_offsets.assign(rows_ + 1, 0);
    for (int row : r_) ++m.row_offsets[row + 1];
    std::partial_sum(m.row_offsets.begin(), m.row_offsets.end(), m.row_offsets.begin());

    const size_t nnz = r_.size();
    std::vector<int> cursor(m.row_offsets.begin(), m.row_offsets.end() - 1);
    std::vector<int> cols(nnz);
    std::vector<double> vals(nnz);
    for (size_t i = 0; i < nnz; ++i) {
        const int slot = cursor[r_[i]]++;
        cols[slot] = c_[i];
        vals[slot] = v_[i];
    }
    // sort within rows, merge duplicates
    for (int row = 0; row < rows_; ++row) {
        const int lo = m.row_offsets[row], hi = cursor[row];
        std::vector<int> order(hi - lo);
        std::iota(order.begin(), order.end(), lo);
        std::sort(order.begin(), order.end(), [&](int a, int b) { return cols[a] < cols[b]; });
        int last_col = -1;
        for (int idx : order) {
            if (cols[idx] == last_col) {
                m.values.back() += vals[idx];
            } else {
                m.col_indices.push_back(cols[idx]);
                m.values.push_back(vals[idx]);
                last_col = cols[idx];
            }
        }
        // row_offsets rewritten below
        cursor[row] = static_cast<int>(m.col_indices.size());
    }
    m.row_offsets[0] = 0;
    for (int row = 0; row < rows_; ++row) m.row_offsets[row + 1] = cursor[row];
    return m;
}

void validate_sparse(const SparseMatrix& m) {
    if (m.rows < 0 || m.cols < 0) throw std::invalid_argument("sparse: negative dimensions");
    if (m.row_offsets.size() != static_cast<size_t>(m.rows) + 1 || m.row_offsets[0] != 0 ||
        m.row_offsets[m.rows] != m.nnz())
        throw std::invalid_argument("sparse: bad row offsets");
    if (m.values.size() != m.col_indices.size())
        throw std::invalid_argument("sparse: values/col_indices length mismatch");
    for (int row = 0; row < m.rows; ++row) {
        if (m.row_offsets[row] > m.row_offsets[row + 1])
            throw std::invalid_argument("sparse: decreasing row offsets");
        int prev = -1;
        for (int k = m.row_offsets[row]; k < m.row_offsets[row + 1]; ++k) {
            if (m.col_indices[k] <= prev || m.col_indices[k] >= m.cols)
                throw std::invalid_argument("sparse: bad column index ordering");
            if (!std::isfinite(m.values[k]))
                throw std::invalid_argument("sparse: non-finite value");
            prev = m.col_indices[k];
        }
    }
}

SparseMatrix identity(int n, double scale) {
    SparseMatrix m;
    m.rows = m.cols = n;
    m.row_offsets.resize(n + 1);
    m.col_indices.resize(n);
    m.values.assign(n, scale);
    for (int i = 0; i <= n; ++i) m.row_offsets[i] = i;
    std::iota(m.col_indices.begin(), m.col_indices.end(), 0);
    return m;
}

SparseMatrix explicit_transpose(const SparseMatrix& m) {
    SparseMatrix t;
    t.rows = m.cols;
    t.cols = m.rows;
    t.row_offsets.assign(t.rows + 1, 0);
    for (int col : m.col_indices) ++t.row_offsets[col + 1];
    std::partial_sum(t.row_offsets.begin(), t.row_offsets.end(), t.row_offsets.begin());
    t.col_indices.resize(m.nnz());
    t.values.resize(m.nnz());
    std::vector<int> cursor(t.row_offsets.begin(), t.row_offsets.end() - 1);
    for (int row = 0; row < m.rows; ++row) {
        for (int k = m.row_offsets[row]; k < m.row_offsets[row + 1]; ++k) {
            const int slot = cursor[m.col_indices[k]]++;
            t.col_indices[slot] = row;  // rows visited in order, so columns stay sorted
            t.values[slot] = m.values[k];
        }
    }
    return t;
}

std::vector<double> spmv(const SparseMatrix& m, std::span<const double> v) {
    if (static_cast<int>(v.size()) != m.cols)
        throw std::invalid_argument("spmv: dimension mismatch");
    std::vector<double> out(m.rows);
    for (int row = 0; row < m.rows; ++row) {
        double acc = 0.0;
        for (int k = m.row_offsets[row]; k < m.row_offsets[row + 1]; ++k)
            acc += m.values[k] * v[m.col_indices[k]];
        out[row] = acc;
    }
    return out;
}

std::vector<double> spmv_transpose(const SparseMatrix& m, std::span<const double> v) {
    if (static_cast<int>(v.size()) != m.rows)
        throw std::invalid_argument("spmv_transpose: dimension mismatch");
    std::vector<double> out(m.cols, 0.0);
    for (int row = 0; row < m.rows; ++row) {
        const double s = v[row];
        if (s == 0.0) continue;
        for (int k = m.row_offsets[row]; k < m.row_offsets[row + 1]; ++k)
            out[m.col_indices[k]] += m.values[k] * s;
    }
    return out;
}

void dump_matrix_market(const SparseMatrix& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << m.rows << " " << m.cols << " " << m.nnz() << "\n";
    out.precision(17);
    for (int row = 0; row < m.rows; ++row)
        for (int k = m.row_offsets[row]; k < m.row_offsets[row + 1]; ++k)
            out << row + 1 << " " << m.col_indices[k] + 1 << " " << m.values[k] << "\n";
}

GradientOperators build_gradient_ops(int width, int height) {
    if (width < 1 || height < 1)
        throw std::invalid_argument("build_gradient_ops: dimensions must be positive");
    const int n = width * height;
    GradientOperators ops;
    ops.width = width;
    ops.height = height;

    auto make = [n](auto&& emit) {
        SparseMatrix m;
        m.rows = m.cols = n;
        m.row_offsets.assign(n + 1, 0);
        for (int p = 0; p < n; ++p) {
            m.row_offsets[p] = m.nnz();
            emit(m, p);
        }
        m.row_offsets[n] = m.nnz();
        return m;
    };

    ops.cx = make([width](SparseMatrix& m, int p) {
        if (p % width < width - 1) {
            m.col_indices.push_back(p);
            m.values.push_back(-1.0);
            m.col_indices.push_back(p + 1);
            m.values.push_back(1.0);
        }
    });
    ops.cy = make([width, height](SparseMatrix& m, int p) {
        if (p / width < height - 1) {
            m.col_indices.push_back(p);
            m.values.push_back(-1.0);
            m.col_indices.push_back(p + width);
            m.values.push_back(1.0);
        }
    });
    return ops;
}

std::vector<double> weights_from_gradient(std::span<const double> d, double epsilon) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("weights_from_gradient: epsilon must be > 0");
    std::vector<double> w(d.size());
    for (size_t i = 0; i < d.size(); ++i) w[i] = 1.0 / (std::abs(d[i]) + epsilon);
    return w;
}

std::vector<double> signs_from_gradient(std::span<const double> d) {
    std::vector<double> s(d.size());
    for (size_t i = 0; i < d.size(); ++i) s[i] = d[i] > 0.0 ? 1.0 : (d[i] < 0.0 ? -1.0 : 0.0);
    return s;
}

SparseMatrix assemble_system(const GradientOperators& ops, std::span<const double> wx,
                             std::span<const double> wy, double lambda, double alpha) {
    const int width = ops.width, height = ops.height;
    const int n = width * height;
    if (!(lambda > 0.0)) throw std::invalid_argument("assemble_system: lambda must be > 0");
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("assemble_system: alpha in [0,1]");
    if (static_cast<int>(wx.size()) != n || static_cast<int>(wy.size()) != n)
        throw std::invalid_argument("assemble_system: weight length mismatch");
    for (int p = 0; p < n; ++p)
        if (!(wx[p] > 0.0) || !(wy[p] > 0.0))
            throw std::invalid_argument("assemble_system: weights must be strictly positive");

    if (alpha == 1.0) return identity(n, 2.0);  // A = 2I exactly

    const double c = lambda * (1.0 - alpha);
    SparseMatrix a;
    a.rows = a.cols = n;
    a.row_offsets.assign(n + 1, 0);
    a.col_indices.reserve(static_cast<size_t>(5) * n);
    a.values.reserve(static_cast<size_t>(5) * n);

    for (int p = 0; p < n; ++p) {
        a.row_offsets[p] = a.nnz();
        const int col = p % width;
        const int row = p / width;
        const bool has_left = col > 0;
        const bool has_right = col < width - 1;
        const bool has_up = row > 0;
        const bool has_down = row < height - 1;

        // (Cx' Wx Cx)_{pp} picks up wx[p] from the edge to the right and wx[p-1] from the left.
        double diag = 2.0;
        if (has_right) diag += c * wx[p];
        if (has_left) diag += c * wx[p - 1];
        if (has_down) diag += c * wy[p];
        if (has_up) diag += c * wy[p - width];

        if (has_up) {
            a.col_indices.push_back(p - width);
            a.values.push_back(-c * wy[p - width]);
        }
        if (has_left) {
            a.col_indices.push_back(p - 1);
            a.values.push_back(-c * wx[p - 1]);
        }
        a.col_indices.push_back(p);
        a.values.push_back(diag);
        if (has_right) {
            a.col_indices.push_back(p + 1);
            a.values.push_back(-c * wx[p]);
        }
        if (has_down) {
            a.col_indices.push_back(p + width);
            a.values.push_back(-c * wy[p]);
        }
    }
    a.row_offsets[n] = a.nnz();
    return a;
}

std::vector<double> assemble_rhs(std::span<const double> v_g, std::span<const double> v_fhat,
                                 const GradientOperators& ops, std::span<const double> sx,
                                 std::span<const double> sy, double lambda, double alpha) {
    const size_t n = static_cast<size_t>(ops.width) * ops.height;
    if (v_g.size() != n || v_fhat.size() != n || sx.size() != n || sy.size() != n)
        throw std::invalid_argument("assemble_rhs: dimension mismatch");
    if (!(lambda > 0.0)) throw std::invalid_argument("assemble_rhs: lambda must be > 0");

    std::vector<double> b(n);
    const double scale = lambda * alpha / 2.0;
    if (scale == 0.0) {
        for (size_t p = 0; p < n; ++p) b[p] = v_g[p] + v_fhat[p];
        return b;
    }
    const auto ctsx = spmv_transpose(ops.cx, sx);
    const auto ctsy = spmv_transpose(ops.cy, sy);
    for (size_t p = 0; p < n; ++p) b[p] = v_g[p] + v_fhat[p] - scale * (ctsx[p] + ctsy[p]);
    return b;
}

}  // namespace sddql
