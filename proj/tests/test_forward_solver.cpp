#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "vpc/verification.hpp"

using namespace vpc;

TEST_CASE("markers carry constant values and the state is transported") {
    RunConfig c = small_config();
    const ControlField B = uniform_field(c, {0.0, 0.5, 1.0});
    const ForwardTrajectory fwd = solve_vp(initial_datum(c), B, c);
    REQUIRE(fwd.markers() > 100);
    REQUIRE(fwd.diag.size() == static_cast<size_t>(fwd.time.nodes()));
    for (int k = 0; k < fwd.time.nodes(); ++k) {
        CHECK(fwd.diag[k].l1 == doctest::Approx(fwd.diag[0].l1).epsilon(1e-12));
        CHECK(fwd.diag[k].linf == doctest::Approx(fwd.diag[0].linf).epsilon(1e-12));
    }
    // f_B(t_k, z_i(t_k)) recovers the marker value by backward characteristics
    const int K = fwd.time.steps;
    std::vector<Vec6> ys;
    for (size_t i = 0; i < fwd.markers(); i += 37) ys.push_back(fwd.at(K, i));
    const auto vals = evaluate_state(fwd, K, ys);
    size_t j = 0;
    for (size_t i = 0; i < fwd.markers(); i += 37, ++j) CHECK(vals[j] == doctest::Approx(fwd.f[i]).epsilon(1e-8));
}

TEST_CASE("phase-space volume is conserved along the discrete flow") {
    RunConfig c = small_config();
    ControlField B = twin_control(c);
    const ForwardTrajectory fwd = solve_vp(initial_datum(c), B, c);
    const ProbeReport r = conservation_probe(fwd, c.tol_conservation);
    CHECK(r.passed);
    CHECK(r.metric < 1e-6);
}

TEST_CASE("serial and OpenMP forward solves agree") {
    RunConfig c = small_config(500);
    const ControlField B = twin_control(c);
    ForwardOptions s, p;
    s.exec = Exec::serial;
    p.exec = Exec::parallel;
    const ForwardTrajectory a = solve_vp(initial_datum(c), B, c, s);
    const ForwardTrajectory b = solve_vp(initial_datum(c), B, c, p);
    REQUIRE(a.z.size() == b.z.size());
    double d = 0;
    for (size_t i = 0; i < a.z.size(); ++i)
        for (int q = 0; q < 6; ++q) d = std::max(d, std::abs(a.z[i][q] - b.z[i][q]));
    CHECK(d < 1e-12);
}

TEST_CASE("marker gradients match finite differences of the state") {
    RunConfig c = small_config(400);
    const ControlField B = twin_control(c);
    ForwardOptions o;
    o.gradients = true;
    const ForwardTrajectory fwd = solve_vp(initial_datum(c), B, c, o);
    REQUIRE(fwd.has_gradients());
    const int k = fwd.time.steps;
    const size_t i = fwd.markers() / 3;
    const Vec6 y = fwd.at(k, i);
    const Vec6 g = fwd.grad_at(k, i);
    for (int a = 0; a < 6; ++a) {
        Vec6 p = y, m = y;
        p[a] += 1e-5;
        m[a] -= 1e-5;
        const auto v = evaluate_state(fwd, k, {p, m});
        CHECK(g[a] == doctest::Approx((v[0] - v[1]) / 2e-5).epsilon(1e-4).scale(1e-6));
    }
}

TEST_CASE("support stays inside the certified ball") {
    RunConfig c = small_config();
    ControlField B = twin_control(c);
    B *= 0.95 * c.K / v_norm(B);
    const ForwardTrajectory fwd = solve_vp(initial_datum(c), B, c);
    const double bound = zeta(c.datum_r, c.T, fwd.a_norm);
    for (const auto& d : fwd.diag) CHECK(d.support <= bound);
}

TEST_CASE("empty datum support is reported") {
    RunConfig c = small_config();
    ParticleEnsemble empty;
    CHECK_THROWS_WITH(solve_vp(empty, initial_datum(c), zero_control(c), c), doctest::Contains("empty ensemble"));
}
