#include "sddql/solver.hpp"

#include <cmath>
#include <stdexcept>

namespace sddql {

namespace {

void require_symmetric(const SparseMatrix& a) {
    if (a.rows != a.cols) throw std::invalid_argument("solver: matrix must be square");
    const SparseMatrix t = explicit_transpose(a);
    if (t.col_indices != a.col_indices || t.values != a.values)
        throw std::invalid_argument("solver: matrix is not symmetric");
}

// Single IC(0) attempt on a + shift*diag(a). Returns false on pivot breakdown.
bool try_ic0(const SparseMatrix& a, double shift, SparseMatrix& l) {
    const int n = a.rows;
    l.rows = l.cols = n;
    l.row_offsets.assign(n + 1, 0);
    l.col_indices.clear();
    l.values.clear();

    std::vector<double> diag(n, 0.0);
    for (int i = 0; i < n; ++i) {
        l.row_offsets[i] = l.nnz();
        double aii = 0.0;
        const int lo = a.row_offsets[i], hi = a.row_offsets[i + 1];
        for (int k = lo; k < hi; ++k) {
            const int j = a.col_indices[k];
            if (j > i) break;
            if (j == i) {
                aii = a.values[k];
                continue;
            }
            // dot of L rows i and j over shared columns < j
            double dot = 0.0;
            int pi = l.row_offsets[i];
            int pj = l.row_offsets[j];
            const int ei = l.nnz();             // row i filled so far
            const int ej = l.row_offsets[j + 1];
            while (pi < ei && pj < ej) {
                const int ci = l.col_indices[pi], cj = l.col_indices[pj];
                if (ci >= j || cj >= j) break;
                if (ci == cj) {
                    dot += l.values[pi] * l.values[pj];
                    ++pi;
                    ++pj;
                } else if (ci < cj) {
                    ++pi;
                } else {
                    ++pj;
                }
            }
            const double lij = (a.values[k] - dot) / diag[j];
            l.col_indices.push_back(j);
            l.values.push_back(lij);
        }
        double sum_sq = 0.0;
        for (int k = l.row_offsets[i]; k < l.nnz(); ++k) sum_sq += l.values[k] * l.values[k];
        const double pivot = aii * (1.0 + shift) - sum_sq;
        if (!(pivot > 0.0) || !std::isfinite(pivot)) return false;
        diag[i] = std::sqrt(pivot);
        l.col_indices.push_back(i);
        l.values.push_back(diag[i]);
    }
    l.row_offsets[n] = l.nnz();
    return true;
}

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

IcFactor incomplete_cholesky(const SparseMatrix& a, double shift_initial, double shift_growth,
                             int max_retries) {
    require_symmetric(a);
    for (int i = 0; i < a.rows; ++i) {
        bool found = false;
        for (int k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k)
            if (a.col_indices[k] == i && a.values[k] > 0.0) found = true;
        if (!found) throw std::invalid_argument("incomplete_cholesky: nonpositive diagonal");
    }

    IcFactor result;
    double shift = 0.0;
    for (int attempt = 0; attempt <= max_retries; ++attempt) {
        if (try_ic0(a, shift, result.l)) {
            result.shift_used = shift;
            return result;
        }
        shift = shift == 0.0 ? shift_initial : shift * shift_growth;
    }
    throw std::runtime_error("incomplete_cholesky: breakdown persists after shift retries");
}

std::vector<double> ic_apply(const SparseMatrix& l, std::span<const double> r) {
    const int n = l.rows;
    if (static_cast<int>(r.size()) != n)
        throw std::invalid_argument("ic_apply: dimension mismatch");
    // forward: L y = r (diagonal entry is last in each row)
    std::vector<double> y(r.begin(), r.end());
    for (int i = 0; i < n; ++i) {
        double acc = y[i];
        const int hi = l.row_offsets[i + 1] - 1;
        for (int k = l.row_offsets[i]; k < hi; ++k) acc -= l.values[k] * y[l.col_indices[k]];
        y[i] = acc / l.values[hi];
    }
    // backward: L' x = y
    for (int i = n - 1; i >= 0; --i) {
        const int hi = l.row_offsets[i + 1] - 1;
        const double xi = y[i] / l.values[hi];
        y[i] = xi;
        for (int k = l.row_offsets[i]; k < hi; ++k) y[l.col_indices[k]] -= l.values[k] * xi;
    }
    return y;
}

SolveOutcome pcg_solve(const SparseMatrix& a, std::span<const double> b,
                       std::span<const double> x0, const IcFactor* precond,
                       const SolverConfig& cfg) {
    const int n = a.rows;
    if (a.rows != a.cols || static_cast<int>(b.size()) != n || static_cast<int>(x0.size()) != n)
        throw std::invalid_argument("pcg_solve: dimension mismatch");
    if (!(cfg.tol > 0.0) || cfg.max_iters < 1)
        throw std::invalid_argument("pcg_solve: bad solver config");

    SolveOutcome out;
    if (precond) out.ic_shift_used = precond->shift_used;

    const double bnorm = norm2(b);
    if (bnorm == 0.0) {
        out.x.assign(n, 0.0);
        out.converged = true;
        return out;
    }

    out.x.assign(x0.begin(), x0.end());
    std::vector<double> r = spmv(a, out.x);
    for (int i = 0; i < n; ++i) r[i] = b[i] - r[i];

    double rnorm = norm2(r);
    out.final_relative_residual = rnorm / bnorm;
    if (out.final_relative_residual <= cfg.tol) {
        out.converged = true;
        return out;
    }

    std::vector<double> z = precond ? ic_apply(precond->l, r) : std::vector<double>(r);
    std::vector<double> p = z;
    double rz = dot(r, z);

    for (int it = 1; it <= cfg.max_iters; ++it) {
        const std::vector<double> ap = spmv(a, p);
        const double pap = dot(p, ap);
        if (!std::isfinite(pap) || pap <= 0.0)
            throw std::runtime_error("pcg_solve: non-SPD behavior (p'Ap <= 0 or NaN)");
        const double alpha = rz / pap;
        for (int i = 0; i < n; ++i) out.x[i] += alpha * p[i];

        if (it % 50 == 0) {
            // recompute the true residual to guard drift on ill-conditioned systems
            r = spmv(a, out.x);
            for (int i = 0; i < n; ++i) r[i] = b[i] - r[i];
        } else {
            for (int i = 0; i < n; ++i) r[i] -= alpha * ap[i];
        }

        rnorm = norm2(r);
        if (!std::isfinite(rnorm)) throw std::runtime_error("pcg_solve: NaN in residual");
        out.iterations = it;
        if (rnorm / bnorm <= cfg.tol) break;

        z = precond ? ic_apply(precond->l, r) : r;
        const double rz_next = dot(r, z);
        const double beta = rz_next / rz;
        rz = rz_next;
        for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }

    // true residual at termination
    std::vector<double> res = spmv(a, out.x);
    for (int i = 0; i < n; ++i) res[i] = b[i] - res[i];
    out.final_relative_residual = norm2(res) / bnorm;
    out.converged = out.final_relative_residual <= cfg.tol;
    return out;
}

std::vector<double> dense_solve(const SparseMatrix& a, std::span<const double> b,
                                int dimension_cap) {
    const int n = a.rows;
    if (a.rows != a.cols || static_cast<int>(b.size()) != n)
        throw std::invalid_argument("dense_solve: dimension mismatch");
    if (n > dimension_cap) throw std::invalid_argument("dense_solve: dimension over cap");

    std::vector<double> dense(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k)
            dense[static_cast<size_t>(i) * n + a.col_indices[k]] = a.values[k];

    // in-place lower Cholesky
    for (int j = 0; j < n; ++j) {
        double d = dense[static_cast<size_t>(j) * n + j];
        for (int k = 0; k < j; ++k) {
            const double v = dense[static_cast<size_t>(j) * n + k];
            d -= v * v;
        }
        if (!(d > 0.0)) throw std::runtime_error("dense_solve: matrix not SPD (pivot failure)");
        const double ljj = std::sqrt(d);
        dense[static_cast<size_t>(j) * n + j] = ljj;
        for (int i = j + 1; i < n; ++i) {
            double s = dense[static_cast<size_t>(i) * n + j];
            for (int k = 0; k < j; ++k)
                s -= dense[static_cast<size_t>(i) * n + k] * dense[static_cast<size_t>(j) * n + k];
            dense[static_cast<size_t>(i) * n + j] = s / ljj;
        }
    }

    std::vector<double> x(b.begin(), b.end());
    for (int i = 0; i < n; ++i) {  // L y = b
        double s = x[i];
        for (int k = 0; k < i; ++k) s -= dense[static_cast<size_t>(i) * n + k] * x[k];
        x[i] = s / dense[static_cast<size_t>(i) * n + i];
    }
    for (int i = n - 1; i >= 0; --i) {  // L' x = y
        double s = x[i];
        for (int k = i + 1; k < n; ++k) s -= dense[static_cast<size_t>(k) * n + i] * x[k];
        x[i] = s / dense[static_cast<size_t>(i) * n + i];
    }
    return x;
}

}  // namespace sddql
