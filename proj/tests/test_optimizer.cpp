#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "vpc/verification.hpp"

using namespace vpc;

TEST_CASE("projection onto the K-ball") {
    RunConfig c = small_config();
    const ControlField B = uniform_field(c, {1, 2, 3});
    const double nb = v_norm(B);
    const ControlField in = project_ball(B, 2 * nb);
    CHECK(v_norm(in - B) == 0.0);
    const ControlField out = project_ball(B, 0.5 * nb);
    CHECK(v_norm(out) == doctest::Approx(0.5 * nb));
    // radial: direction unchanged
    CHECK(v_inner(out, B) == doctest::Approx(v_norm(out) * nb));
}

TEST_CASE("band-limited fields are smooth and seeded") {
    RunConfig c = small_config();
    const ControlField a = band_limited_field(time_grid(c), spatial_grid(c), 3);
    const ControlField b = band_limited_field(time_grid(c), spatial_grid(c), 3);
    const ControlField d = band_limited_field(time_grid(c), spatial_grid(c), 4);
    CHECK(v_norm(a - b) == 0.0);
    CHECK(v_norm(a - d) > 0.0);
}

TEST_CASE("projected gradient descends monotonically on a twin problem") {
    RunConfig c = small_config(600);
    c.lambda = 1e-4;
    const ControlField Bs = twin_control(c);
    ControlProblem P(c, twin_target(c, Bs));
    OptimizerOptions o = optimizer_options(c);
    o.max_iter = 8;
    const OptimizationTrace tr = minimize(P, zero_control(c), o);
    REQUIRE(tr.iters.size() >= 2);
    CHECK(tr.monotone());
    CHECK(tr.iters.back().J < 0.9 * tr.iters.front().J);
    CHECK(tr.iters.back().tracking < tr.iters.front().tracking);
    for (const auto& it : tr.iters) CHECK(it.norm <= c.K * (1 + 1e-12));
}

TEST_CASE("stationary start stops immediately") {
    RunConfig c = small_config(300);
    c.lambda = 0;
    ControlProblem P(c, twin_target(c, zero_control(c)));
    const OptimizationTrace tr = minimize(P, zero_control(c), optimizer_options(c));
    CHECK(tr.status == "stationary");
    CHECK(tr.iters.size() == 1);
}

TEST_CASE("variational inequality pairing") {
    RunConfig c = small_config();
    const ControlField G = uniform_field(c, {1, 0, 0});
    const ControlField Bbar = zero_control(c);
    std::vector<ControlField> panel{uniform_field(c, {1, 0, 0}), uniform_field(c, {-1, 0, 0})};
    const VariationalReport r = variational_inequality_check(Bbar, G, panel);
    REQUIRE(r.pairings.size() == 2);
    CHECK(r.pairings[0] == doctest::Approx(l2_inner(G, panel[0])));
    CHECK(r.min_pairing == doctest::Approx(-l2_inner(G, G)));
}
