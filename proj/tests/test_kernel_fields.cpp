#include <doctest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "vpc/kernel_fields.hpp"

using namespace vpc;

namespace {

std::vector<Vec3> random_points(int n, double r, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> U(-r, r);
    std::vector<Vec3> x(n);
    for (auto& p : x) p = {U(rng), U(rng), U(rng)};
    return x;
}

double max_abs_diff(const std::vector<Vec3>& a, const std::vector<Vec3>& b, double* scale) {
    double d = 0, s = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        d = std::max(d, norm(a[i] - b[i]));
        s = std::max(s, norm(b[i]));
    }
    if (scale) *scale = s;
    return d;
}

}  // namespace

TEST_CASE("kernel derivatives match finite differences") {
    const MollifiedKernel k(0.3);
    const Vec3 d{0.4, -0.2, 0.7};
    const Vec3 g = k.grad(d);
    const Mat3 H = k.hessian(d);
    for (int a = 0; a < 3; ++a) {
        Vec3 p = d, m = d;
        p[a] += 1e-6;
        m[a] -= 1e-6;
        CHECK(g[a] == doctest::Approx((k.value(p) - k.value(m)) / 2e-6).epsilon(1e-6));
        const Vec3 gp = k.grad(p), gm = k.grad(m);
        for (int b = 0; b < 3; ++b) CHECK(H[b * 3 + a] == doctest::Approx((gp[b] - gm[b]) / 2e-6).epsilon(1e-5));
    }
    CHECK(k.value({0, 0, 0}) == doctest::Approx(1.0 / 0.3));
    CHECK(norm(k.grad({0, 0, 0})) == 0.0);
}

TEST_CASE("FFT grid convolution equals the direct node sum") {
    const SpatialGrid g(1.0, 8);
    GridConvolver conv(g, MollifiedKernel(g.h));
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> U(-1, 1);
    std::vector<double> rho(g.size());
    for (auto& r : rho) r = U(rng);
    const std::vector<KernelPart> parts{KernelPart::value, KernelPart::d2, KernelPart::d13};
    std::vector<std::vector<double>> out;
    conv.convolve(rho.data(), parts, out);
    for (size_t p = 0; p < parts.size(); ++p) {
        std::vector<double> ref(g.size());
        conv.convolve_direct(rho.data(), parts[p], ref.data(), Exec::serial);
        double err = 0, sc = 0;
        for (int m = 0; m < g.size(); ++m) {
            err = std::max(err, std::abs(out[p][m] - ref[m]));
            sc = std::max(sc, std::abs(ref[m]));
        }
        CHECK(err <= 1e-11 * sc);
    }
}

TEST_CASE("serial and OpenMP direct sums agree") {
    const InitialDatum d{1.0, 1.0};
    const ParticleEnsemble e = sample_initial_ensemble(d, 600, 2);
    const auto xs = random_points(50, 1.0, 4);
    const MollifiedKernel k(0.2);
    const auto a = grad_psi_many(e, xs, k, Exec::serial);
    const auto b = grad_psi_many(e, xs, k, Exec::parallel);
    double sc = 0;
    CHECK(max_abs_diff(a, b, &sc) <= 1e-13 * sc);
    const auto pa = psi_many(e, xs, k, Exec::serial);
    const auto pb = psi_many(e, xs, k, Exec::parallel);
    for (size_t i = 0; i < xs.size(); ++i) CHECK(pa[i] == doctest::Approx(pb[i]).epsilon(1e-13));
}

TEST_CASE("grad_psi is the gradient of psi") {
    const ParticleEnsemble e = sample_initial_ensemble(InitialDatum{1.0, 1.0}, 400, 5);
    const MollifiedKernel k(0.25);
    const Vec3 x{0.3, 0.1, -0.4};
    const Vec3 g = grad_psi(e, x, k);
    for (int a = 0; a < 3; ++a) {
        Vec3 p = x, m = x;
        p[a] += 1e-5;
        m[a] -= 1e-5;
        CHECK(g[a] == doctest::Approx((psi(e, p, k) - psi(e, m, k)) / 2e-5).epsilon(1e-6));
    }
}

TEST_CASE("grid interaction converges to the direct interaction") {
    const MollifiedKernel k(0.3);
    DirectInteraction direct(k);
    const auto x = random_points(800, 0.8, 7);
    std::vector<double> q(x.size());
    for (size_t i = 0; i < q.size(); ++i) q[i] = 1.0 / x.size();
    std::vector<Vec3> Q(x.size());
    for (size_t i = 0; i < Q.size(); ++i) Q[i] = {q[i], -0.5 * q[i], 0.25 * q[i]};
    std::vector<Vec3> ref;
    std::vector<double> pref;
    direct.grad_psi(x, q, ref);
    direct.phi(x, Q, pref);
    double eg[2], ep[2], sc = 0, sp = 0;
    const int sizes[2] = {13, 25};
    for (int s = 0; s < 2; ++s) {
        GridInteraction grid(SpatialGrid(2.0, sizes[s]), k);
        std::vector<Vec3> a;
        std::vector<double> pa;
        grid.grad_psi(x, q, a);
        grid.phi(x, Q, pa);
        eg[s] = max_abs_diff(a, ref, &sc);
        ep[s] = 0;
        for (size_t i = 0; i < x.size(); ++i) {
            ep[s] = std::max(ep[s], std::abs(pa[i] - pref[i]));
            sp = std::max(sp, std::abs(pref[i]));
        }
    }
    // cloud-in-cell is second order in h: halving h cuts the error by about 4
    CHECK(eg[1] < 0.05 * sc);
    CHECK(ep[1] < 0.05 * sp);
    CHECK(eg[0] / eg[1] > 2.5);
    CHECK(ep[0] / ep[1] > 2.5);
}

TEST_CASE("interpolation is the transpose of deposition") {
    const SpatialGrid g(1.0, 7);
    GridInteraction gi(g, MollifiedKernel(0.2));
    const auto x = random_points(30, 0.9, 11);
    std::vector<double> q(x.size());
    for (size_t i = 0; i < q.size(); ++i) q[i] = std::sin(1.0 + i);
    std::vector<double> field(g.size());
    for (int m = 0; m < g.size(); ++m) field[m] = std::cos(0.3 * m);
    std::vector<double> rho, at(x.size());
    gi.deposit(x, q.data(), 1, rho);
    gi.interpolate(x, field, 1, at.data());
    double lhs = 0, rhs = 0;
    for (int m = 0; m < g.size(); ++m) lhs += rho[m] * field[m];
    for (size_t i = 0; i < x.size(); ++i) rhs += q[i] * at[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}
