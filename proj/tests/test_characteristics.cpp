#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "vpc/characteristics.hpp"

using namespace vpc;

TEST_CASE("free streaming is exact") {
    const FlowField F = FlowField::free(TimeGrid(1.0, 10));
    const Vec6 z{0.1, 0.2, -0.3, 0.5, -0.4, 0.2};
    const Vec6 y = flow(F, 0.0, z, 1.0);
    for (int a = 0; a < 3; ++a) {
        CHECK(y[a] == doctest::Approx(z[a] + z[3 + a]).epsilon(1e-14));
        CHECK(y[3 + a] == doctest::Approx(z[3 + a]).epsilon(1e-14));
    }
    const Vec6 back = flow(F, 1.0, y, 0.0);
    for (int a = 0; a < 6; ++a) CHECK(back[a] == doctest::Approx(z[a]).epsilon(1e-13));
}

TEST_CASE("uniform magnetic field: gyration with the exact Larmor rotation") {
    RunConfig c = small_config();
    c.T = 1.0;
    c.dt = 0.01;
    const double b = 2.0;
    const ControlField B = uniform_field(c, {0, 0, b});
    FlowField F = FlowField::free(B.time);
    F.B = &B;
    const Vec6 z{0.1, 0.0, 0.0, 0.3, 0.0, 0.1};
    const Vec6 y = flow(F, 0.0, z, 1.0);
    // v' = v x B with B = b e3: (v1, v2) rotates clockwise at rate b
    CHECK(y[3] == doctest::Approx(0.3 * std::cos(b)).epsilon(1e-8));
    CHECK(y[4] == doctest::Approx(-0.3 * std::sin(b)).epsilon(1e-8));
    CHECK(y[5] == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(y[0] == doctest::Approx(0.1 + 0.3 * std::sin(b) / b).epsilon(1e-8));
    CHECK(y[1] == doctest::Approx(-0.3 * (1 - std::cos(b)) / b).epsilon(1e-8));
    CHECK(y[2] == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("step Jacobian matches finite differences and is volume preserving") {
    RunConfig c = small_config();
    ControlField B = zero_control(c);
    for (int k = 0; k < B.time.nodes(); ++k)
        for (int m = 0; m < B.grid.size(); ++m) {
            const Vec3 x = B.grid.node(m);
            B.at(k, m)[0] = 0.5 * std::sin(x[1]);
            B.at(k, m)[2] = 1.0 + 0.3 * x[0] * x[1];
        }
    FlowField F = FlowField::free(B.time);
    F.B = &B;
    F.accel = [](int, double, const Vec3& x, Mat3* jac) {
        if (jac) {
            jac->fill(0.0);
            (*jac)[0] = -1.0;
            (*jac)[1] = 0.2;
            (*jac)[3] = 0.2;
            (*jac)[8] = -0.5;
        }
        return Vec3{-x[0] + 0.2 * x[1], 0.2 * x[0], -0.5 * x[2]};
    };
    const Vec6 z{0.2, -0.3, 0.1, 0.4, 0.1, -0.2};
    Mat6 J;
    node_step(F, 3, true, z, &J);
    const double hfd = 1e-6;
    for (int b = 0; b < 6; ++b) {
        Vec6 p = z, m = z;
        p[b] += hfd;
        m[b] -= hfd;
        const Vec6 yp = node_step(F, 3, true, p), ym = node_step(F, 3, true, m);
        for (int a = 0; a < 6; ++a) CHECK(J[a * 6 + b] == doctest::Approx((yp[a] - ym[a]) / (2 * hfd)).epsilon(1e-6));
    }
    // divergence-free transport: det of the flow map is 1 up to the RK4 truncation
    const Mat6 Jf = flow_jacobian(F, 0.0, z, c.T, 1e-5);
    CHECK(det6(Jf) == doctest::Approx(1.0).epsilon(1e-6));
    const Mat6 I = matmul6(Jf, inverse6(Jf));
    for (int a = 0; a < 6; ++a)
        for (int b = 0; b < 6; ++b) CHECK(I[a * 6 + b] == doctest::Approx(a == b ? 1.0 : 0.0).scale(1).epsilon(1e-10));
}

TEST_CASE("support bound") {
    CHECK(zeta(1.0, 0.5, 0.0) == doctest::Approx(std::exp(1.0)));
    CHECK(zeta(1.0, 0.25, 2.0) == doctest::Approx(std::exp(0.5) * 2.0));
    // monotone in every argument
    CHECK(zeta(1.1, 0.5, 1.0) > zeta(1.0, 0.5, 1.0));
    CHECK(zeta(1.0, 0.6, 1.0) > zeta(1.0, 0.5, 1.0));
    CHECK(zeta(1.0, 0.5, 1.1) > zeta(1.0, 0.5, 1.0));
}

TEST_CASE("paths under a bounded force stay inside the support bound") {
    RunConfig c = small_config();
    c.T = 0.5;
    const ControlField B = uniform_field(c, {0.5, -1.0, 2.0});
    FlowField F = FlowField::free(B.time);
    F.B = &B;
    const double amax = 0.8;
    F.accel = [amax](int, double, const Vec3& x, Mat3*) {
        return Vec3{amax * std::tanh(x[1]), -amax * std::tanh(x[0]), 0.0};
    };
    const double bound = zeta(1.0, c.T, amax * std::sqrt(c.T));
    for (int s = 0; s < 64; ++s) {
        const double th = 0.7 * s, ph = 1.3 * s;
        const Vec6 z{std::cos(th) * 0.6, std::sin(th) * 0.6, 0.1, 0.5 * std::cos(ph), 0.5 * std::sin(ph), -0.2};
        REQUIRE(norm6(z) <= 1.0);
        CHECK(norm6(flow(F, 0.0, z, c.T)) <= bound);
    }
}
