#pragma once

#include <vector>

#include "sddql/image.hpp"
#include "sddql/solver.hpp"
#include "sddql/sparse.hpp"

namespace sddql {

enum class InnerSolver { PCG, DENSE };  // DENSE is the small-instance oracle path

struct DespeckleParams {
    double lambda = 100.0;
    double epsilon = 1e-2;
    double alpha = 0.5;
    int n_max = 5;
    SolverConfig solver;
    InnerSolver inner_solver = InnerSolver::PCG;
};

// One outer iteration's linear system and the data it was built from.
struct IterationSystem {
    SparseMatrix a;
    std::vector<double> b;
    std::vector<double> wx, wy;
    std::vector<double> sx, sy;
    std::vector<double> v_fhat;
};

struct IterationRecord {
    int outer_n = 0;
    int pcg_iterations = 0;
    double pcg_relative_residual = 0.0;
    bool pcg_converged = true;
    double ic_shift_used = 0.0;
    double cost_true_value = 0.0;
    double wall_time_ms = 0.0;
};

struct DespeckleReport {
    std::vector<IterationRecord> records;
    long total_pcg_iterations = 0;
    double total_wall_time_ms = 0.0;
};

struct DespeckleResult {
    Image image;
    DespeckleReport report;
};

void validate_params(const DespeckleParams& params);

// QL surrogate for |z| around the proxy zhat:
// (1-alpha)*z^2/(|zhat|+epsilon) + alpha*sgn(zhat)*z
double ql_abs(double z, double zhat, double alpha, double epsilon);

// (1/2N) * sum_p [ (f_p-g_p)^2 + lambda*(|dx f|_p + |dy f|_p) ],
// forward differences, zero right/bottom boundary derivatives.
double cost_true(const Image& f, const Image& g, double lambda);

// The iteratively linearized cost; weights and signs are taken from fhat.
double cost_linearized(const Image& f, const Image& fhat, const Image& g,
                       const DespeckleParams& params);

// Gradient of cost_linearized with respect to f (length N). Zero at the solution
// of the per-iteration linear system.
std::vector<double> cost_gradient(const Image& f, const Image& fhat, const Image& g,
                                  const DespeckleParams& params);

// Builds the linear system for one outer iteration from the current proxy.
IterationSystem build_iteration_system(const std::vector<double>& v_g,
                                       const std::vector<double>& v_fhat,
                                       const GradientOperators& ops,
                                       const DespeckleParams& params);

// SDD-QL outer loop: n_max reweighted solves, warm-started PCG with IC(0).
// alpha == 1 takes the exact diagonal path (no PCG). alpha == 0 is the SDD baseline.
DespeckleResult run_despeckle(const Image& g, const DespeckleParams& params);

}  // namespace sddql
