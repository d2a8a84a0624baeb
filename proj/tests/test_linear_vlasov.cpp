#include <doctest.h>

#include <cmath>

#include "oracle_case.hpp"
#include "support.hpp"

using namespace vpc;

TEST_CASE("cutoff profiles") {
    for (auto prof : {CutoffProfile::cubic, CutoffProfile::quintic}) {
        const Cutoff chi{1.0, 2.0, prof};
        CHECK(chi.value({0.5, 0, 0, 0, 0, 0}) == 1.0);
        CHECK(chi.value({0, 0, 0, 0, 0, 2.5}) == 0.0);
        CHECK(chi.value({1.5, 0, 0, 0, 0, 0}) == doctest::Approx(0.5));
        const Vec6 z{0.9, 0.3, -0.5, 0.6, 0.2, 0.4};
        const Vec6 g = chi.grad(z);
        for (int a = 0; a < 6; ++a) {
            Vec6 p = z, m = z;
            p[a] += 1e-6;
            m[a] -= 1e-6;
            CHECK(g[a] == doctest::Approx((chi.value(p) - chi.value(m)) / 2e-6).epsilon(1e-6));
        }
    }
    const Cutoff c = build_cutoff(1.0, 0.5, 0.0);
    CHECK(c.r1 == doctest::Approx(std::exp(1.0)));
    CHECK(c.r2 == doctest::Approx(2 * std::exp(1.0)));
}

TEST_CASE("picard_rate") {
    CHECK_THROWS_WITH(picard_rate({1.0, 0.5}), doctest::Contains("too-short log"));
    const auto r = picard_rate({1.0, 0.5, 0.125});
    REQUIRE(r.size() == 2);
    CHECK(r[0] == 0.5);
    CHECK(r[1] == 0.25);
}

namespace {

struct SmallLinear {
    TimeGrid tg{0.2, 4};
    FlowField F = FlowField::free(tg);
    Carrier car;
    SmallLinear() {
        F.accel = [](int, double, const Vec3& x, Mat3*) { return Vec3{-x[0], -2 * x[1], -x[2]}; };
        car = Carrier::lattice(0.6, 3, F, false, false);
    }
};

}  // namespace

TEST_CASE("uncoupled problem integrates the source along carriers") {
    SmallLinear s;
    LinearVlasovProblem p;
    for (size_t i = 0; i < s.car.n; ++i) p.datum.push_back(std::cos(i * 0.1));
    p.b = [](int, size_t, const Vec6&) { return 1.0; };
    DirectInteraction inter(MollifiedKernel(0.3), Exec::serial);
    const LinearSolution sol = solve_linear(p, s.car, inter, PicardOptions{});
    for (int k = 0; k <= s.tg.steps; ++k)
        for (size_t i = 0; i < s.car.n; i += 50)
            CHECK(sol.value(k, i) == doctest::Approx(p.datum[i] + s.tg.t(k)).epsilon(1e-12));

    p.orientation = Orientation::final_value;
    const LinearSolution back = solve_linear(p, s.car, inter, PicardOptions{});
    for (size_t i = 0; i < s.car.n; i += 50)
        CHECK(back.value(0, i) == doctest::Approx(p.datum[i] - s.tg.T).epsilon(1e-12));
}

TEST_CASE("solution is linear in datum and source") {
    SmallLinear s;
    const InitialDatum bump{1.0, 1.0};
    auto base = [&](double scale_datum, double scale_b) {
        LinearVlasovProblem p;
        for (size_t i = 0; i < s.car.n; ++i) p.datum.push_back(scale_datum * bump.value(s.car.at(0, i)));
        p.C = [bump](int, size_t, const Vec6& z) {
            const Vec6 g = bump.grad(z);
            return Vec3{g[3], g[4], g[5]};
        };
        p.dva = p.C;
        p.b = [=](int, size_t, const Vec6& z) { return scale_b * z[0] * bump.value(z); };
        return p;
    };
    DirectInteraction inter(MollifiedKernel(0.3), Exec::serial);
    PicardOptions o;
    o.tol = 1e-13;
    o.max_iter = 60;
    const LinearSolution a = solve_linear(base(1, 0), s.car, inter, o);
    const LinearSolution b = solve_linear(base(0, 1), s.car, inter, o);
    const LinearSolution ab = solve_linear(base(2, -3), s.car, inter, o);
    double err = 0, sc = 0;
    for (size_t j = 0; j < ab.f.size(); ++j) {
        err = std::max(err, std::abs(ab.f[j] - (2 * a.f[j] - 3 * b.f[j])));
        sc = std::max(sc, std::abs(ab.f[j]));
    }
    CHECK(err <= 1e-10 * sc);
}

TEST_CASE("Picard iteration contracts") {
    SmallLinear s;
    const InitialDatum bump{1.0, 1.0};
    LinearVlasovProblem p;
    for (size_t i = 0; i < s.car.n; ++i) p.datum.push_back(bump.value(s.car.at(0, i)));
    p.dva = [bump](int, size_t, const Vec6& z) {
        const Vec6 g = bump.grad(z);
        return Vec3{g[3], g[4], g[5]};
    };
    DirectInteraction inter(MollifiedKernel(0.3), Exec::serial);
    PicardOptions o;
    o.tol = 1e-12;
    o.max_iter = 60;
    const LinearSolution sol = solve_linear(p, s.car, inter, o);
    REQUIRE(sol.picard_log.size() >= 3);
    const auto r = picard_rate(sol.picard_log);
    for (size_t i = 1; i < r.size(); ++i) CHECK(r[i] < 0.5);

    PicardOptions tight = o;
    tight.max_iter = 2;
    CHECK_THROWS_AS(solve_linear(p, s.car, inter, tight), Error);
}

// The dense space-time oracle is implicit Euler on 4 steps: O(dt) truncation against the trapezoid
// representation formula, about 1% at this size.
TEST_CASE("collocation oracle, initial-value orientation") {
    const OracleComparison c = compare_with_oracle(false);
    CHECK(c.relative() < 0.02);
    CHECK(compare_with_oracle(false, 0.0).relative() < 0.002);
}

TEST_CASE("collocation oracle, final-value orientation") {
    CHECK(compare_with_oracle(true).relative() < 0.02);
    CHECK(compare_with_oracle(true, 3.0).relative() < 0.03);
}
