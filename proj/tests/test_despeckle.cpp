#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "sddql/despeckle.hpp"
#include "sddql/simulate_metrics.hpp"

using namespace sddql;

namespace {

Image random_image(std::mt19937_64& rng, int w, int h, double lo, double hi) {
    Image img(w, h);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (auto& p : img.pixels) p = dist(rng);
    return img;
}

Image speckled_phantom(int side, uint64_t seed) {
    PhantomSpec pspec;
    pspec.size = side;
    pspec.seed = seed;
    pspec.levels = {20.0, 80.0, 160.0};
    return apply_speckle(generate_phantom(pspec).image, SpeckleSpec{1.0, seed});
}

}  // namespace

TEST_CASE("ql_abs touches |z| at the proxy point") {
    CHECK(std::abs(ql_abs(4.0, 4.0, 0.5, 1e-6) - 4.0) <= 5e-7);
    CHECK(ql_abs(0.0, 2.0, 0.5, 0.1) == 0.0);
    CHECK(ql_abs(1.0, 2.0, 0.5, 1e-15) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK_THROWS(ql_abs(1.0, 1.0, 0.5, 0.0));
}

TEST_CASE("ql_abs proxy-point accuracy bound") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> zdist(-10.0, 10.0);
    std::uniform_real_distribution<double> adist(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        double zhat = zdist(rng);
        if (zhat == 0.0) continue;
        const double alpha = adist(rng);
        const double eps = std::pow(10.0, -1.0 - 5.0 * adist(rng));  // [1e-6, 1e-1]
        const double err = std::abs(ql_abs(zhat, zhat, alpha, eps) - std::abs(zhat));
        CHECK(err <= (1.0 - alpha) * eps);
        // the exact deficit
        const double exact = (1.0 - alpha) * std::abs(zhat) * eps / (std::abs(zhat) + eps);
        CHECK(err == doctest::Approx(exact).epsilon(1e-6).scale(1.0));
    }
}

TEST_CASE("ql_abs is convex in z") {
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> dist(-10.0, 10.0);
    std::uniform_real_distribution<double> tdist(0.0, 1.0);
    for (int i = 0; i < 500; ++i) {
        const double z1 = dist(rng), z2 = dist(rng), zhat = dist(rng), t = tdist(rng);
        const double lhs = ql_abs(t * z1 + (1 - t) * z2, zhat, 0.5, 1e-3);
        const double rhs = t * ql_abs(z1, zhat, 0.5, 1e-3) + (1 - t) * ql_abs(z2, zhat, 0.5, 1e-3);
        CHECK(lhs <= rhs + 1e-9);
    }
}

TEST_CASE("cost_true basics") {
    const Image g(4, 4, 7.0);
    CHECK(cost_true(g, g, 10.0) == 0.0);
    CHECK(cost_true(Image(2, 1, {0.0, 1.0}), Image(2, 1, {0.0, 0.0}), 1.0) == 0.5);
    CHECK_THROWS(cost_true(Image(2, 1, 0.0), Image(1, 2, 0.0), 1.0));
}

TEST_CASE("cost_true is linear in lambda on the TV part") {
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 5; ++trial) {
        const Image f = random_image(rng, 6, 5, 0.0, 10.0);
        const Image g = random_image(rng, 6, 5, 0.0, 10.0);
        const double fidelity = cost_true(f, g, 1.0) * 2 - cost_true(f, g, 2.0);  // isolates it
        const double tv1 = cost_true(f, g, 1.0) - fidelity;
        const double tv3 = cost_true(f, g, 3.0) - fidelity;
        CHECK(tv3 == doctest::Approx(3.0 * tv1).epsilon(1e-10));
    }
}

TEST_CASE("cost_linearized vanishes at a shared constant") {
    const Image c(5, 5, 3.0);
    DespeckleParams params;
    CHECK(cost_linearized(c, c, c, params) == 0.0);
}

TEST_CASE("cost_linearized approximates cost_true at the proxy within lambda*(1-alpha)*eps") {
    std::mt19937_64 rng(34);
    DespeckleParams params;
    params.lambda = 50.0;
    params.epsilon = 1e-2;
    params.alpha = 0.3;
    for (int trial = 0; trial < 10; ++trial) {
        const Image fhat = random_image(rng, 8, 8, 0.0, 20.0);
        const Image g = random_image(rng, 8, 8, 0.0, 20.0);
        const double diff = std::abs(cost_linearized(fhat, fhat, g, params) -
                                     cost_true(fhat, g, params.lambda));
        CHECK(diff <= params.lambda * (1.0 - params.alpha) * params.epsilon);
    }
}

TEST_CASE("alpha=1 linearized regularizer is exact at the proxy") {
    std::mt19937_64 rng(35);
    DespeckleParams params;
    params.alpha = 1.0;
    const Image fhat = random_image(rng, 6, 6, 0.0, 10.0);
    const Image g = random_image(rng, 6, 6, 0.0, 10.0);
    CHECK(cost_linearized(fhat, fhat, g, params) ==
          doctest::Approx(cost_true(fhat, g, params.lambda)).epsilon(1e-13));
}

TEST_CASE("alpha=0 linearized cost equals the pure quadratic reweighting") {
    std::mt19937_64 rng(36);
    DespeckleParams params;
    params.alpha = 0.0;
    params.lambda = 75.0;
    params.epsilon = 1e-3;
    for (int trial = 0; trial < 5; ++trial) {
        const Image f = random_image(rng, 7, 6, 0.0, 10.0);
        const Image fhat = random_image(rng, 7, 6, 0.0, 10.0);
        const Image g = random_image(rng, 7, 6, 0.0, 10.0);

        // independent evaluation of the quadratic-only surrogate
        const int w = f.width, h = f.height;
        double acc = 0.0;
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                const double dg = f.at(r, c) - g.at(r, c);
                const double dp = f.at(r, c) - fhat.at(r, c);
                acc += dg * dg + dp * dp;
                if (c < w - 1) {
                    const double d = f.at(r, c + 1) - f.at(r, c);
                    const double dh = fhat.at(r, c + 1) - fhat.at(r, c);
                    acc += params.lambda * d * d / (std::abs(dh) + params.epsilon);
                }
                if (r < h - 1) {
                    const double d = f.at(r + 1, c) - f.at(r, c);
                    const double dh = fhat.at(r + 1, c) - fhat.at(r, c);
                    acc += params.lambda * d * d / (std::abs(dh) + params.epsilon);
                }
            }
        acc /= 2.0 * w * h;
        CHECK(cost_linearized(f, fhat, g, params) == doctest::Approx(acc).epsilon(1e-13));
    }
}

TEST_CASE("cost_gradient matches central finite differences") {
    std::mt19937_64 rng(37);
    const double step = 1e-6;
    for (double alpha : {0.0, 0.3, 0.5, 1.0}) {
        DespeckleParams params;
        params.alpha = alpha;
        Image f = random_image(rng, 8, 8, 0.0, 10.0);
        const Image fhat = random_image(rng, 8, 8, 0.0, 10.0);
        const Image g = random_image(rng, 8, 8, 0.0, 10.0);
        const auto grad = cost_gradient(f, fhat, g, params);
        for (int p = 0; p < f.pixel_count(); p += 7) {  // sample of components
            const double keep = f.pixels[p];
            f.pixels[p] = keep + step;
            const double plus = cost_linearized(f, fhat, g, params);
            f.pixels[p] = keep - step;
            const double minus = cost_linearized(f, fhat, g, params);
            f.pixels[p] = keep;
            const double fd = (plus - minus) / (2.0 * step);
            CHECK(grad[p] == doctest::Approx(fd).epsilon(1e-5));
        }
    }
}

TEST_CASE("cost_gradient is zero at a shared constant and at the linear-system solution") {
    const Image c(6, 6, 2.5);
    DespeckleParams params;
    for (double v : cost_gradient(c, c, c, params)) CHECK(v == 0.0);

    std::mt19937_64 rng(38);
    const Image g = random_image(rng, 8, 8, 0.0, 20.0);
    const Image fhat = random_image(rng, 8, 8, 0.0, 20.0);
    const auto ops = build_gradient_ops(8, 8);
    const IterationSystem sys = build_iteration_system(g.pixels, fhat.pixels, ops, params);
    const auto solution = dense_solve(sys.a, sys.b);
    const Image f(8, 8, solution);
    const auto grad = cost_gradient(f, fhat, g, params);
    double binf = 0.0, ginf = 0.0;
    for (double v : sys.b) binf = std::max(binf, std::abs(v));
    for (double v : grad) ginf = std::max(ginf, std::abs(v));
    CHECK(ginf <= 1e-9 * (1.0 + binf) / f.pixel_count());
}

TEST_CASE("dense minimizer beats random perturbations of cost_linearized") {
    std::mt19937_64 rng(39);
    DespeckleParams params;
    const Image g = speckled_phantom(8, 40);
    const Image fhat = g;
    const auto ops = build_gradient_ops(8, 8);
    const IterationSystem sys = build_iteration_system(g.pixels, fhat.pixels, ops, params);
    const auto solution = dense_solve(sys.a, sys.b);
    const Image best(8, 8, solution);
    const double base = cost_linearized(best, fhat, g, params);
    double scale = 0.0;
    for (double v : solution) scale = std::max(scale, std::abs(v));
    std::uniform_real_distribution<double> dist(-0.1 * (1.0 + scale), 0.1 * (1.0 + scale));
    for (int trial = 0; trial < 100; ++trial) {
        Image perturbed = best;
        for (auto& p : perturbed.pixels) p += dist(rng);
        CHECK(cost_linearized(perturbed, fhat, g, params) >= base);
    }
}

TEST_CASE("constant images are a fixed point of run_despeckle") {
    for (double c : {0.0, 1.5, 200.0}) {
        const Image g(12, 9, c);
        const DespeckleResult res = run_despeckle(g, DespeckleParams{});
        CHECK(res.image.pixels == g.pixels);  // bitwise: warm start short-circuits
        CHECK(res.report.total_pcg_iterations == 0);
        CHECK(res.report.records.size() == 5);
    }
}

TEST_CASE("alpha=1 path skips PCG and solves 2v=b") {
    DespeckleParams params;
    params.alpha = 1.0;
    params.n_max = 1;
    const Image g = speckled_phantom(16, 41);
    const DespeckleResult res = run_despeckle(g, params);
    CHECK(res.report.total_pcg_iterations == 0);

    // single iteration from v_fhat = v_g: output must equal b/2 elementwise
    const auto ops = build_gradient_ops(16, 16);
    const IterationSystem sys = build_iteration_system(g.pixels, g.pixels, ops, params);
    Image expected(16, 16);
    for (int p = 0; p < 256; ++p) expected.pixels[p] = sys.b[p] / 2.0;
    // the core may run in transposed orientation, so allow no difference at all
    CHECK(oracles::max_abs_diff(res.image.pixels, expected.pixels) == 0.0);
}

TEST_CASE("run_despeckle is deterministic") {
    const Image g = speckled_phantom(24, 42);
    const DespeckleResult a = run_despeckle(g, DespeckleParams{});
    const DespeckleResult b = run_despeckle(g, DespeckleParams{});
    CHECK(a.image.pixels == b.image.pixels);
    REQUIRE(a.report.records.size() == b.report.records.size());
    for (size_t i = 0; i < a.report.records.size(); ++i) {
        CHECK(a.report.records[i].pcg_iterations == b.report.records[i].pcg_iterations);
        CHECK(a.report.records[i].pcg_relative_residual ==
              b.report.records[i].pcg_relative_residual);
        CHECK(a.report.records[i].cost_true_value == b.report.records[i].cost_true_value);
    }
}

TEST_CASE("run_despeckle commutes with transposition bit-exactly") {
    for (uint64_t seed : {7, 8}) {
        const Image g = speckled_phantom(20, seed);
        const DespeckleResult direct = run_despeckle(g, DespeckleParams{});
        const DespeckleResult flipped = run_despeckle(transpose(g), DespeckleParams{});
        CHECK(transpose(direct.image).pixels == flipped.image.pixels);
    }
}

TEST_CASE("run_despeckle with dense inner solver matches tight PCG") {
    DespeckleParams pcg_params;
    pcg_params.solver.tol = 1e-10;
    pcg_params.solver.max_iters = 20000;
    DespeckleParams dense_params = pcg_params;
    dense_params.inner_solver = InnerSolver::DENSE;

    const Image g = speckled_phantom(16, 43);
    const DespeckleResult via_pcg = run_despeckle(g, pcg_params);
    const DespeckleResult via_dense = run_despeckle(g, dense_params);
    CHECK(oracles::rel_l2_diff(via_pcg.image.pixels, via_dense.image.pixels) <= 1e-6);
}

TEST_CASE("run_despeckle flags but does not fail on PCG non-convergence") {
    DespeckleParams params;
    params.epsilon = 1e-5;  // ill-conditioned
    params.solver.max_iters = 2;
    params.solver.tol = 1e-12;
    const Image g = speckled_phantom(16, 44);
    const DespeckleResult res = run_despeckle(g, params);
    bool any_unconverged = false;
    for (const auto& rec : res.report.records) any_unconverged |= !rec.pcg_converged;
    CHECK(any_unconverged);
}

TEST_CASE("parameter validation") {
    DespeckleParams params;
    params.lambda = 0.0;
    CHECK_THROWS(validate_params(params));
    params = {};
    params.alpha = 1.5;
    CHECK_THROWS(validate_params(params));
    params = {};
    params.n_max = 0;
    CHECK_THROWS(validate_params(params));
}
