#pragma once

#include <algorithm>
#include <cmath>

#include "collocation_oracle.hpp"
#include "vpc/linear_vlasov.hpp"

// 3^6 lattice, 4 steps, linear field A = -kappa x and constant B, full coefficient set.
struct OracleComparison {
    double sup_error = 0;   // max |solver - oracle|
    double sup_oracle = 0;  // max |oracle|
    double relative() const { return sup_oracle > 0 ? sup_error / sup_oracle : sup_error; }
    int iterations = 0;
};

inline OracleComparison compare_with_oracle(bool final_value, double coupling = 1.0) {
    using namespace vpc;
    const double kappa = 2.0, T = 0.2, eps = 0.3, r = 0.6;
    const int steps = 4;
    const Vec3 Bc{0.3, -0.2, 1.5};
    const TimeGrid tg(T, steps);
    const SpatialGrid sg(4.0, 9);
    ControlField B(tg, sg);
    for (int k = 0; k < tg.nodes(); ++k)
        for (int m = 0; m < sg.size(); ++m)
            for (int c = 0; c < 3; ++c) B.at(k, m)[c] = Bc[c];
    FlowField F;
    F.time = tg;
    F.B = &B;
    F.accel = [kappa](int, double, const Vec3& x, Mat3* jac) {
        if (jac) {
            jac->fill(0.0);
            for (int a = 0; a < 3; ++a) (*jac)[a * 4] = -kappa;
        }
        return Vec3{-kappa * x[0], -kappa * x[1], -kappa * x[2]};
    };
    const Carrier car = Carrier::lattice(r, 3, F, final_value, false);

    const InitialDatum bump{1.0, 1.0};
    auto bumpv = [bump](const Vec6& z) { return bump.value(z); };
    auto dvbump = [bump](const Vec6& z) {
        const Vec6 g = bump.grad(z);
        return Vec3{g[3], g[4], g[5]};
    };
    const Cutoff chi{0.9, 1.8, CutoffProfile::cubic};

    LinearVlasovProblem p;
    p.orientation = final_value ? Orientation::final_value : Orientation::initial;
    const int ref = final_value ? steps : 0;
    for (size_t i = 0; i < car.n; ++i) p.datum.push_back(bumpv(car.at(ref, i)));
    p.C = [=](int, size_t, const Vec6& z) { return coupling * 0.5 * dvbump(z); };
    p.dva = [=](int, size_t, const Vec6& z) { return coupling * dvbump(z); };
    p.b = [=](int, size_t, const Vec6& z) { return 0.5 * bumpv(z); };
    p.chi = [chi](const Vec6& z) { return chi.value(z); };
    p.r0 = 1.0;
    DirectInteraction inter(MollifiedKernel(eps), Exec::serial);
    PicardOptions opt;
    opt.tol = 1e-12;
    opt.max_iter = 60;
    const LinearSolution sol = solve_linear(p, car, inter, opt);

    oracle::LinearCase c;
    c.kappa = kappa;
    c.Bc = {Bc[0], Bc[1], Bc[2]};
    c.eps = eps;
    c.T = T;
    c.steps = steps;
    c.final_value = final_value;
    for (size_t i = 0; i < car.n; ++i) {
        const Vec6& z = car.at(ref, i);
        c.nodes.push_back({z[0], z[1], z[2], z[3], z[4], z[5]});
        c.w.push_back(car.w[i]);
    }
    auto to6 = [](const oracle::V6& z) { return Vec6{z[0], z[1], z[2], z[3], z[4], z[5]}; };
    auto to3 = [](const Vec3& v) { return oracle::V3{v[0], v[1], v[2]}; };
    c.datum = [=](const oracle::V6& z) { return bumpv(to6(z)); };
    c.b = [=](const oracle::V6& z) { return 0.5 * bumpv(to6(z)); };
    c.chi = [=](const oracle::V6& z) { return chi.value(to6(z)); };
    c.C = [=](const oracle::V6& z) { return to3(coupling * 0.5 * dvbump(to6(z))); };
    c.dva = [=](const oracle::V6& z) { return to3(coupling * dvbump(to6(z))); };
    const auto ref_sol = oracle::solve(c);

    OracleComparison out;
    out.iterations = sol.iterations;
    for (int k = 0; k <= steps; ++k)
        for (size_t i = 0; i < car.n; ++i) {
            out.sup_error = std::max(out.sup_error, std::abs(sol.value(k, i) - ref_sol[k][i]));
            out.sup_oracle = std::max(out.sup_oracle, std::abs(ref_sol[k][i]));
        }
    return out;
}
