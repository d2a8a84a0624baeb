#include <doctest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"
#include "vpc/phase_model.hpp"

using namespace vpc;

TEST_CASE("config validation rejects each bad value") {
    RunConfig c;
    c.eps_kernel = c.h();
    CHECK_NOTHROW(c.validate());
    RunConfig bad = c;
    bad.lambda = -1;
    CHECK_THROWS_WITH(bad.validate(), doctest::Contains("lambda must be"));
    bad = c;
    bad.gamma = 1.0;
    CHECK_THROWS_WITH(bad.validate(), doctest::Contains("gamma"));
    bad = c;
    bad.eps_kernel = 0;
    CHECK_THROWS_WITH(bad.validate(), doctest::Contains("eps_kernel"));
    bad = c;
    bad.tol_oracle = 0;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("time grid trapezoid weights sum to T") {
    const TimeGrid tg(0.5, 7);
    double s = 0;
    for (int k = 0; k < tg.nodes(); ++k) s += tg.weight(k);
    CHECK(s == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(tg.t(tg.steps) == 0.5);
}

TEST_CASE("trilinear stencil reproduces linear functions and partitions unity") {
    const SpatialGrid g(2.0, 9);
    const Vec3 x{0.31, -0.77, 1.12};
    int idx[8];
    double w[8], dw[8][3];
    REQUIRE(g.stencil_grad(x, idx, w, dw));
    double s = 0, lin = 0;
    Vec3 dlin{0, 0, 0};
    for (int a = 0; a < 8; ++a) {
        const Vec3 X = g.node(idx[a]);
        const double f = 2 * X[0] - 3 * X[1] + 0.5 * X[2];
        s += w[a];
        lin += w[a] * f;
        for (int c = 0; c < 3; ++c) dlin[c] += dw[a][c] * f;
    }
    CHECK(s == doctest::Approx(1.0));
    CHECK(lin == doctest::Approx(2 * x[0] - 3 * x[1] + 0.5 * x[2]));
    CHECK(dlin[0] == doctest::Approx(2.0));
    CHECK(dlin[1] == doctest::Approx(-3.0));
    CHECK(dlin[2] == doctest::Approx(0.5));
    CHECK_FALSE(g.stencil({2.5, 0, 0}, idx, w));
}

TEST_CASE("datum gradient matches finite differences") {
    const InitialDatum d{1.3, 1.0};
    const Vec6 z{0.2, -0.1, 0.3, 0.15, -0.25, 0.05};
    const Vec6 g = d.grad(z);
    for (int a = 0; a < 6; ++a) {
        Vec6 p = z, m = z;
        p[a] += 1e-6;
        m[a] -= 1e-6;
        CHECK(g[a] == doctest::Approx((d.value(p) - d.value(m)) / 2e-6).epsilon(1e-6));
    }
    CHECK(d.value({1, 0, 0, 0, 0, 0}) == 0.0);
}

TEST_CASE("lattice ensemble mass converges to the exact bump mass") {
    // int_{R^6} c (1 - |z|^2/r^2)^3 = c r^6 |S^5| B(3, 4) / 2 = c r^6 pi^3 / 120
    const InitialDatum d{1.0, 1.0};
    const double exact = std::pow(std::numbers::pi, 3) / 120.0;
    const double e1 = std::abs(sample_lattice_ensemble(d, 0.2).mass() - exact);
    const double e2 = std::abs(sample_lattice_ensemble(d, 0.1).mass() - exact);
    // cell-centred rule on a C^2 bump: already at round-off scale on coarse lattices
    CHECK(e1 < 1e-5 * exact);
    CHECK(e2 < 1e-5 * exact);
    const ParticleEnsemble e = sample_initial_ensemble(d, 5000, 1);
    CHECK(e.size() > 3000);
    CHECK(e.size() < 8000);
    CHECK(e.max_radius() < 1.0);
}

TEST_CASE("V norm of constant and linear fields") {
    RunConfig c = small_config();
    const ControlField B = uniform_field(c, {0.7, 0, 0});
    const SpatialGrid& g = B.grid;
    const double vol = std::pow(g.n * g.h, 3);
    CHECK(v_norm(B) == doctest::Approx(0.7 * std::sqrt(c.T * vol)).epsilon(1e-12));

    // B_1 = x_1: edges along x_1 carry |DB|^2 = 1, the mirror closure leaves 1/h on the two end planes
    ControlField lin = zero_control(c);
    for (int k = 0; k < lin.time.nodes(); ++k)
        for (int m = 0; m < g.size(); ++m) lin.at(k, m)[0] = g.node(m)[0];
    const double* s = lin.at(0, 0);
    const double n = g.n, h = g.h;
    CHECK(grad_sq(g, s) == doctest::Approx((n - 1) * n * n * h * h * h));
    CHECK(hessian_sq(g, s) == doctest::Approx(2 * n * n * h));
    CHECK(v_inner(lin, lin) == doctest::Approx(v_norm(lin) * v_norm(lin)).epsilon(1e-10));
}

TEST_CASE("Riesz map inverts the V inner product") {
    RunConfig c = small_config();
    ControlField G = zero_control(c), H = zero_control(c);
    for (int k = 0; k < G.time.nodes(); ++k)
        for (int m = 0; m < G.grid.size(); ++m) {
            const Vec3 x = G.grid.node(m);
            G.at(k, m)[1] = std::sin(1.3 * x[0] + k) * std::cos(x[2]);
            H.at(k, m)[1] = x[0] * x[1] + 0.1 * k;
            H.at(k, m)[2] = std::exp(-dot(x, x));
        }
    const ControlField R = v_riesz(G);
    CHECK(v_inner(R, H) == doctest::Approx(l2_inner(G, H)).epsilon(1e-9));
    CHECK(dual_norm(G) == doctest::Approx(std::sqrt(l2_inner(G, R))).epsilon(1e-9));
}

TEST_CASE("lattice Green's function values and far field") {
    const int n = 16;
    const auto tab = lattice_green_table(n);
    auto at = [&](int a, int b, int c) { return tab[(static_cast<size_t>(a) * n + b) * n + c]; };
    // Watson's integral / 6 and the stencil identity at the origin
    CHECK(at(0, 0, 0) == doctest::Approx(0.252731009859).epsilon(1e-9));
    CHECK(at(1, 0, 0) == doctest::Approx(0.086064343192).epsilon(1e-9));
    // -Delta G = 0 away from the origin
    CHECK(6 * at(2, 1, 0) - at(1, 1, 0) - at(3, 1, 0) - at(2, 0, 0) - at(2, 2, 0) - 2 * at(2, 1, 1) ==
          doctest::Approx(0.0).epsilon(1e-10).scale(1));
    const double r = 12.0;
    CHECK(at(12, 0, 0) == doctest::Approx(1.0 / (4 * std::numbers::pi * r)).epsilon(3e-3));
}

TEST_CASE("exterior-closed Laplacian is the inverse of the Green matrix on the box") {
    const int n = 6;
    const SpatialGrid g(1.0, n);
    const int N = g.size();
    const auto tab = lattice_green_table(n);
    auto green = [&](int p, int q) {
        const int a = std::abs(p / (n * n) - q / (n * n));
        const int b = std::abs((p / n) % n - (q / n) % n);
        const int c = std::abs(p % n - q % n);
        return tab[(static_cast<size_t>(a) * n + b) * n + c];
    };
    std::vector<double> e(N * 3, 0.0), y(N * 3);
    double worst = 0;
    for (int s = 0; s < N; ++s) {
        std::fill(e.begin(), e.end(), 0.0);
        e[s * 3] = 1.0;
        apply_exterior_laplacian(g, e.data(), y.data());
        for (int p = 0; p < N; ++p) {
            double acc = 0;
            for (int q = 0; q < N; ++q) acc += green(p, q) * y[q * 3];
            acc *= g.h * g.h;
            worst = std::max(worst, std::abs(acc - (p == s ? 1.0 : 0.0)));
        }
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("regularizer is symmetric and positive") {
    RunConfig c = small_config();
    ControlField a = zero_control(c), b = zero_control(c);
    for (int k = 0; k < a.time.nodes(); ++k)
        for (int m = 0; m < a.grid.size(); ++m) {
            const Vec3 x = a.grid.node(m);
            a.at(k, m)[0] = 1.0 + x[1];
            a.at(k, m)[2] = std::cos(x[0] * x[2]);
            b.at(k, m)[0] = std::sin(x[0] + 0.2 * k);
            b.at(k, m)[1] = x[2] * x[2];
        }
    CHECK(reg_inner(a, b) == doctest::Approx(reg_inner(b, a)).epsilon(1e-10));
    CHECK(reg_inner(a, a) > 0);
    CHECK(reg_inner(b, b) > 0);
    // constant fields cost energy: the exterior extension decays to zero
    const ControlField u = uniform_field(c, {1, 0, 0});
    CHECK(reg_inner(u, u) > 0);
}
