#include "sddql/despeckle.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace sddql {

void validate_params(const DespeckleParams& params) {
    if (!(params.lambda > 0.0)) throw std::invalid_argument("params: lambda must be > 0");
    if (!(params.epsilon > 0.0)) throw std::invalid_argument("params: epsilon must be > 0");
    if (params.alpha < 0.0 || params.alpha > 1.0)
        throw std::invalid_argument("params: alpha must be in [0,1]");
    if (params.n_max < 1) throw std::invalid_argument("params: n_max must be >= 1");
    if (!(params.solver.tol > 0.0) || params.solver.tol >= 1.0)
        throw std::invalid_argument("params: solver tol must be in (0,1)");
    if (params.solver.max_iters < 1)
        throw std::invalid_argument("params: solver max_iters must be >= 1");
}

double ql_abs(double z, double zhat, double alpha, double epsilon) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("ql_abs: epsilon must be > 0");
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("ql_abs: alpha must be in [0,1]");
    const double sign = zhat > 0.0 ? 1.0 : (zhat < 0.0 ? -1.0 : 0.0);
    return (1.0 - alpha) * z * z / (std::abs(zhat) + epsilon) + alpha * sign * z;
}

namespace {

void require_same_dims(const Image& a, const Image& b, const char* what) {
    if (a.width != b.width || a.height != b.height)
        throw std::invalid_argument(std::string(what) + ": image dimension mismatch");
}

}  // namespace

double cost_true(const Image& f, const Image& g, double lambda) {
    require_same_dims(f, g, "cost_true");
    if (!(lambda > 0.0)) throw std::invalid_argument("cost_true: lambda must be > 0");
    const int w = f.width, h = f.height;
    double acc = 0.0;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const double diff = f.at(r, c) - g.at(r, c);
            double tv = 0.0;
            if (c < w - 1) tv += std::abs(f.at(r, c + 1) - f.at(r, c));
            if (r < h - 1) tv += std::abs(f.at(r + 1, c) - f.at(r, c));
            acc += diff * diff + lambda * tv;
        }
    }
    return acc / (2.0 * w * h);
}

double cost_linearized(const Image& f, const Image& fhat, const Image& g,
                       const DespeckleParams& params) {
    require_same_dims(f, g, "cost_linearized");
    require_same_dims(f, fhat, "cost_linearized");
    validate_params(params);
    const int w = f.width, h = f.height;
    const double alpha = params.alpha, eps = params.epsilon;
    double acc = 0.0;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const double dg = f.at(r, c) - g.at(r, c);
            const double dp = f.at(r, c) - fhat.at(r, c);
            double reg = 0.0;
            if (c < w - 1) {
                const double dx = f.at(r, c + 1) - f.at(r, c);
                const double dxh = fhat.at(r, c + 1) - fhat.at(r, c);
                reg += ql_abs(dx, dxh, alpha, eps);
            }
            if (r < h - 1) {
                const double dy = f.at(r + 1, c) - f.at(r, c);
                const double dyh = fhat.at(r + 1, c) - fhat.at(r, c);
                reg += ql_abs(dy, dyh, alpha, eps);
            }
            acc += dg * dg + dp * dp + params.lambda * reg;
        }
    }
    return acc / (2.0 * w * h);
}

std::vector<double> cost_gradient(const Image& f, const Image& fhat, const Image& g,
                                  const DespeckleParams& params) {
    require_same_dims(f, g, "cost_gradient");
    require_same_dims(f, fhat, "cost_gradient");
    validate_params(params);
    const int n = f.pixel_count();
    const auto ops = build_gradient_ops(f.width, f.height);

    const auto dxh = spmv(ops.cx, fhat.pixels);
    const auto dyh = spmv(ops.cy, fhat.pixels);
    const auto wx = weights_from_gradient(dxh, params.epsilon);
    const auto wy = weights_from_gradient(dyh, params.epsilon);
    const auto sx = signs_from_gradient(dxh);
    const auto sy = signs_from_gradient(dyh);

    auto dxf = spmv(ops.cx, f.pixels);
    auto dyf = spmv(ops.cy, f.pixels);
    for (int p = 0; p < n; ++p) {
        dxf[p] *= wx[p];
        dyf[p] *= wy[p];
    }
    const auto quad_x = spmv_transpose(ops.cx, dxf);
    const auto quad_y = spmv_transpose(ops.cy, dyf);
    const auto lin_x = spmv_transpose(ops.cx, sx);
    const auto lin_y = spmv_transpose(ops.cy, sy);

    const double cq = params.lambda * (1.0 - params.alpha);
    const double cl = params.lambda * params.alpha / 2.0;
    std::vector<double> grad(n);
    for (int p = 0; p < n; ++p) {
        grad[p] = ((f.pixels[p] - g.pixels[p]) + (f.pixels[p] - fhat.pixels[p]) +
                   cq * (quad_x[p] + quad_y[p]) + cl * (lin_x[p] + lin_y[p])) /
                  n;
    }
    return grad;
}

IterationSystem build_iteration_system(const std::vector<double>& v_g,
                                       const std::vector<double>& v_fhat,
                                       const GradientOperators& ops,
                                       const DespeckleParams& params) {
    IterationSystem sys;
    sys.v_fhat = v_fhat;
    const auto dx = spmv(ops.cx, v_fhat);
    const auto dy = spmv(ops.cy, v_fhat);
    sys.wx = weights_from_gradient(dx, params.epsilon);
    sys.wy = weights_from_gradient(dy, params.epsilon);
    sys.sx = signs_from_gradient(dx);
    sys.sy = signs_from_gradient(dy);
    sys.a = assemble_system(ops, sys.wx, sys.wy, params.lambda, params.alpha);
    sys.b = assemble_rhs(v_g, v_fhat, ops, sys.sx, sys.sy, params.lambda, params.alpha);
    return sys;
}

namespace {

// The raw Algorithm-1 loop, orientation already fixed by the caller.
DespeckleResult run_core(const Image& g, const DespeckleParams& params) {
    const int n = g.pixel_count();
    const auto ops = build_gradient_ops(g.width, g.height);

    const std::vector<double>& v_g = g.pixels;
    std::vector<double> v_f = v_g;

    DespeckleResult result;
    result.report.records.reserve(params.n_max);

    for (int outer = 1; outer <= params.n_max; ++outer) {
        const auto t0 = std::chrono::steady_clock::now();
        IterationRecord rec;
        rec.outer_n = outer;

        const std::vector<double> v_fhat = v_f;
        IterationSystem sys = build_iteration_system(v_g, v_fhat, ops, params);

        if (params.alpha == 1.0) {
            // A = 2I: solve elementwise, no PCG
            for (int p = 0; p < n; ++p) v_f[p] = sys.b[p] / 2.0;
        } else if (params.inner_solver == InnerSolver::DENSE) {
            v_f = dense_solve(sys.a, sys.b);
        } else {
            const IcFactor ic =
                incomplete_cholesky(sys.a, params.solver.ic_shift_initial,
                                    params.solver.ic_shift_growth, params.solver.ic_max_retries);
            SolveOutcome out = pcg_solve(sys.a, sys.b, v_fhat, &ic, params.solver);
            v_f = std::move(out.x);
            rec.pcg_iterations = out.iterations;
            rec.pcg_relative_residual = out.final_relative_residual;
            rec.pcg_converged = out.converged;  // non-convergence is accepted, only flagged
            rec.ic_shift_used = out.ic_shift_used;
        }

        for (int p = 0; p < n; ++p)
            if (!std::isfinite(v_f[p]))
                throw std::runtime_error("run_despeckle: non-finite iterate");

        Image f(g.width, g.height, v_f);
        rec.cost_true_value = cost_true(f, g, params.lambda);
        rec.wall_time_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        result.report.total_pcg_iterations += rec.pcg_iterations;
        result.report.total_wall_time_ms += rec.wall_time_ms;
        result.report.records.push_back(rec);
    }

    result.image = Image(g.width, g.height, std::move(v_f));
    return result;
}

// True when the transpose of img orders lexicographically before img itself.
bool transposed_orientation_preferred(const Image& img) {
    if (img.width != img.height) return img.width > img.height;
    const int n = img.width;
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            const double a = img.at(r, c), b = img.at(c, r);
            if (b < a) return true;
            if (a < b) return false;
        }
    return false;
}

}  // namespace

DespeckleResult run_despeckle(const Image& g, const DespeckleParams& params) {
    validate_image(g);
    validate_params(params);
    // Canonicalize orientation so that despeckling commutes with transposition
    // bit-exactly (the x/y boundary rules swap consistently, but floating-point
    // reduction order would otherwise differ between the two orientations).
    if (transposed_orientation_preferred(g)) {
        DespeckleResult result = run_core(transpose(g), params);
        result.image = transpose(result.image);
        return result;
    }
    return run_core(g, params);
}

}  // namespace sddql
