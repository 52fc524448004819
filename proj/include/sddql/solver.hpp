#pragma once

#include <span>
#include <vector>

#include "sddql/sparse.hpp"

namespace sddql {

struct SolverConfig {
    double tol = 1e-2;        // relative residual ||b - Ax|| / ||b||
    int max_iters = 100;
    double ic_shift_initial = 1e-3;
    double ic_shift_growth = 2.0;
    int ic_max_retries = 20;
};

struct SolveOutcome {
    std::vector<double> x;
    int iterations = 0;
    double final_relative_residual = 0.0;
    bool converged = false;
    double ic_shift_used = 0.0;
};

struct IcFactor {
    SparseMatrix l;        // lower triangular, pattern of lower(a)
    double shift_used = 0.0;  // beta such that a + beta*diag(a) was factorized
};

// Zero-fill incomplete Cholesky. On pivot breakdown retries on a + beta*diag(a),
// beta growing geometrically; throws after ic_max_retries failures.
IcFactor incomplete_cholesky(const SparseMatrix& a, double shift_initial = 1e-3,
                             double shift_growth = 2.0, int max_retries = 20);

// Solves L y = r then L' x = y.
std::vector<double> ic_apply(const SparseMatrix& l, std::span<const double> r);

// Preconditioned conjugate gradient. Pass precond == nullptr for plain CG.
SolveOutcome pcg_solve(const SparseMatrix& a, std::span<const double> b,
                       std::span<const double> x0, const IcFactor* precond,
                       const SolverConfig& cfg);

// Dense Cholesky direct solve; correctness oracle for small systems.
std::vector<double> dense_solve(const SparseMatrix& a, std::span<const double> b,
                                int dimension_cap = 4096);

}  // namespace sddql
