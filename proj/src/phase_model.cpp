#include "vpc/phase_model.hpp"

#include <fftw3.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <utility>

namespace vpc {

namespace {
[[noreturn]] void bad(const std::string& msg) { throw Error("invalid config", msg); }
}  // namespace

int RunConfig::steps() const { return std::max(1, static_cast<int>(std::lround(T / dt))); }

void RunConfig::validate() const {
    if (!(T > 0)) bad("T must be > 0");
    if (!(lambda >= 0)) bad("lambda must be ≥ 0");
    if (!(K > 0)) bad("K must be > 0");
    if (!(gamma > 0 && gamma < 1)) bad("gamma must be in (0,1)");
    if (!(eps_kernel > 0)) bad("eps_kernel must be > 0");
    if (!(dt > 0)) bad("dt must be > 0");
    if (n_particles < 1) bad("n_particles must be ≥ 1");
    if (!(L > 0)) bad("L must be > 0");
    if (n < 2) bad("n must be ≥ 2");
    if (!(picard_tol > 0)) bad("picard_tol must be > 0");
    if (picard_max_iter < 1) bad("picard_max_iter must be ≥ 1");
    if (!(datum_c >= 0)) bad("datum_c must be ≥ 0");
    if (!(datum_r > 0)) bad("datum_r must be > 0");
    if (lattice_n < 2) bad("lattice_n must be ≥ 2");
    if (!(jitter >= 0 && jitter < 1)) bad("jitter must be in [0,1)");
    if (opt_max_iter < 0) bad("opt_max_iter must be ≥ 0");
    if (!(opt_step0 > 0)) bad("opt_step0 must be > 0");
    if (!(opt_armijo > 0 && opt_armijo < 1)) bad("opt_armijo must be in (0,1)");
    if (!(opt_backtrack > 0 && opt_backtrack < 1)) bad("opt_backtrack must be in (0,1)");
    if (opt_max_backtracks < 1) bad("opt_max_backtracks must be ≥ 1");
    if (!(opt_tol >= 0)) bad("opt_tol must be ≥ 0");
    if (!(unique_threshold > 0)) bad("unique_threshold must be > 0");
    const std::pair<const char*, double> tols[] = {
        {"tol_conservation", tol_conservation}, {"tol_frechet", tol_frechet}, {"tol_duality", tol_duality},
        {"tol_second", tol_second},             {"tol_tracking", tol_tracking}, {"tol_frj", tol_frj},
        {"tol_stationarity", tol_stationarity}, {"tol_unique", tol_unique},   {"tol_oracle", tol_oracle}};
    for (const auto& [key, v] : tols)
        if (!(v > 0)) bad(std::string(key) + " must be > 0");
}

TimeGrid::TimeGrid(double T_, int steps_) : T(T_), steps(steps_), dt(T_ / steps_) {
    if (!(T_ > 0) || steps_ < 1) throw Error("invalid time grid");
}

TimeGrid TimeGrid::from_dt(double T, double dt) { return TimeGrid(T, std::max(1, static_cast<int>(std::lround(T / dt)))); }

SpatialGrid::SpatialGrid(double L_, int n_) : L(L_), n(n_), h(2.0 * L_ / (n_ - 1)) {
    if (!(L_ > 0) || n_ < 2) throw Error("invalid spatial grid");
}

Vec3 SpatialGrid::node(int m) const {
    const int k = m % n, j = (m / n) % n, i = m / (n * n);
    return {coord(i), coord(j), coord(k)};
}

namespace {
// Cell index and fraction along one axis; false outside [-L, L].
inline bool axis(double x, double L, double h, int n, int& i, double& fr) {
    if (!(x >= -L && x <= L)) return false;
    const double u = (x + L) / h;
    i = std::min(static_cast<int>(u), n - 2);
    fr = u - i;
    return true;
}
}  // namespace

bool SpatialGrid::stencil(const Vec3& x, int idx[8], double w[8]) const {
    int i[3];
    double fr[3];
    for (int a = 0; a < 3; ++a) {
        if (!axis(x[a], L, h, n, i[a], fr[a])) {
            for (int c = 0; c < 8; ++c) idx[c] = 0, w[c] = 0.0;
            return false;
        }
    }
    int c = 0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int d = 0; d < 2; ++d, ++c) {
                idx[c] = index(i[0] + a, i[1] + b, i[2] + d);
                w[c] = (a ? fr[0] : 1 - fr[0]) * (b ? fr[1] : 1 - fr[1]) * (d ? fr[2] : 1 - fr[2]);
            }
    return true;
}

bool SpatialGrid::stencil_grad(const Vec3& x, int idx[8], double w[8], double dw[8][3]) const {
    int i[3];
    double fr[3];
    for (int a = 0; a < 3; ++a) {
        if (!axis(x[a], L, h, n, i[a], fr[a])) {
            for (int c = 0; c < 8; ++c) idx[c] = 0, w[c] = 0.0, dw[c][0] = dw[c][1] = dw[c][2] = 0.0;
            return false;
        }
    }
    const double ih = 1.0 / h;
    int c = 0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int d = 0; d < 2; ++d, ++c) {
                const double wx = a ? fr[0] : 1 - fr[0], wy = b ? fr[1] : 1 - fr[1], wz = d ? fr[2] : 1 - fr[2];
                const double sx = a ? ih : -ih, sy = b ? ih : -ih, sz = d ? ih : -ih;
                idx[c] = index(i[0] + a, i[1] + b, i[2] + d);
                w[c] = wx * wy * wz;
                dw[c][0] = sx * wy * wz;
                dw[c][1] = wx * sy * wz;
                dw[c][2] = wx * wy * sz;
            }
    return true;
}

ControlField::ControlField(const TimeGrid& tg, const SpatialGrid& sg)
    : time(tg), grid(sg), data(static_cast<size_t>(tg.nodes()) * sg.size() * 3, 0.0) {}

Vec3 ControlField::eval_node_time(int k, const Vec3& x) const {
    int idx[8];
    double w[8];
    Vec3 out{0, 0, 0};
    if (!grid.stencil(x, idx, w)) return out;
    for (int c = 0; c < 8; ++c) {
        const double* b = at(k, idx[c]);
        out[0] += w[c] * b[0];
        out[1] += w[c] * b[1];
        out[2] += w[c] * b[2];
    }
    return out;
}

namespace {
inline void time_slot(const TimeGrid& tg, double t, int& k, double& th) {
    const double s = t / tg.dt;
    k = std::clamp(static_cast<int>(std::floor(s)), 0, tg.steps - 1);
    th = std::clamp(s - k, 0.0, 1.0);
}
}  // namespace

Vec3 ControlField::eval(double t, const Vec3& x) const {
    int k;
    double th;
    time_slot(time, t, k, th);
    int idx[8];
    double w[8];
    Vec3 out{0, 0, 0};
    if (!grid.stencil(x, idx, w)) return out;
    for (int c = 0; c < 8; ++c) {
        const double* b0 = at(k, idx[c]);
        const double* b1 = at(k + 1, idx[c]);
        for (int d = 0; d < 3; ++d) out[d] += w[c] * ((1 - th) * b0[d] + th * b1[d]);
    }
    return out;
}

Vec3 ControlField::eval_grad(double t, const Vec3& x, Mat3& jac) const {
    int k;
    double th;
    time_slot(time, t, k, th);
    int idx[8];
    double w[8], dw[8][3];
    Vec3 out{0, 0, 0};
    jac.fill(0.0);
    if (!grid.stencil_grad(x, idx, w, dw)) return out;
    for (int c = 0; c < 8; ++c) {
        const double* b0 = at(k, idx[c]);
        const double* b1 = at(k + 1, idx[c]);
        for (int d = 0; d < 3; ++d) {
            const double bv = (1 - th) * b0[d] + th * b1[d];
            out[d] += w[c] * bv;
            for (int e = 0; e < 3; ++e) jac[d * 3 + e] += dw[c][e] * bv;
        }
    }
    return out;
}

ControlField& ControlField::operator+=(const ControlField& o) {
    if (!compatible(o)) throw Error("grid mismatch");
    for (size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
    return *this;
}

ControlField& ControlField::operator*=(double s) {
    for (double& d : data) d *= s;
    return *this;
}

void ControlField::axpy(double a, const ControlField& x) {
    if (!compatible(x)) throw Error("grid mismatch");
    for (size_t i = 0; i < data.size(); ++i) data[i] += a * x.data[i];
}

void ControlField::set_zero() { std::fill(data.begin(), data.end(), 0.0); }

ControlField operator+(ControlField a, const ControlField& b) { return a += b; }
ControlField operator-(ControlField a, const ControlField& b) {
    a.axpy(-1.0, b);
    return a;
}
ControlField operator*(double s, ControlField a) { return a *= s; }

double InitialDatum::value(const Vec6& z) const {
    double r2 = 0;
    for (double c_ : z) r2 += c_ * c_;
    const double q = 1.0 - r2 / (r * r);
    return q > 0 ? c * q * q * q : 0.0;
}

double InitialDatum::value_grad(const Vec6& z, Vec6& g) const {
    double r2 = 0;
    for (double c_ : z) r2 += c_ * c_;
    const double q = 1.0 - r2 / (r * r);
    if (q <= 0) {
        g.fill(0.0);
        return 0.0;
    }
    // d/dz c q^3 = 3 c q^2 * (-2 z / r^2)
    const double s = -6.0 * c * q * q / (r * r);
    for (int i = 0; i < 6; ++i) g[i] = s * z[i];
    return c * q * q * q;
}

Vec6 InitialDatum::grad(const Vec6& z) const {
    Vec6 g;
    value_grad(z, g);
    return g;
}

double ParticleEnsemble::mass() const {
    double m = 0;
    for (size_t i = 0; i < z.size(); ++i) m += w[i] * f[i];
    return m;
}

double ParticleEnsemble::max_radius() const {
    double r = 0;
    for (const auto& p : z) r = std::max(r, norm6(p));
    return r;
}

double lattice_spacing_for(double radius, int n) {
    const double vol = std::pow(std::numbers::pi, 3) / 6.0 * std::pow(radius, 6);
    return std::pow(vol / std::max(n, 1), 1.0 / 6.0);
}

ParticleEnsemble sample_lattice_ensemble(const InitialDatum& datum, double spacing, double jitter, std::uint64_t seed) {
    if (!(datum.r > 0) || !(spacing > 0)) throw Error("invalid datum");
    const int M = static_cast<int>(std::ceil(datum.r / spacing));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-0.5, 0.5);
    ParticleEnsemble e;
    const double w = std::pow(spacing, 6);
    const double r2max = datum.r * datum.r;
    int j[6];
    for (j[0] = -M; j[0] < M; ++j[0])
        for (j[1] = -M; j[1] < M; ++j[1])
            for (j[2] = -M; j[2] < M; ++j[2])
                for (j[3] = -M; j[3] < M; ++j[3])
                    for (j[4] = -M; j[4] < M; ++j[4])
                        for (j[5] = -M; j[5] < M; ++j[5]) {
                            Vec6 z;
                            double r2 = 0;
                            for (int a = 0; a < 6; ++a) {
                                z[a] = spacing * (j[a] + 0.5);
                                if (jitter > 0) z[a] += jitter * spacing * U(rng);
                                r2 += z[a] * z[a];
                            }
                            if (r2 >= r2max) continue;
                            e.z.push_back(z);
                            e.f.push_back(datum.value(z));
                            e.w.push_back(w);
                        }
    if (e.z.empty()) throw Error("empty ensemble", "no lattice node inside the support ball");
    return e;
}

ParticleEnsemble sample_initial_ensemble(const InitialDatum& datum, int n, std::uint64_t seed, double jitter) {
    if (n < 1) throw Error("empty ensemble", "marker count must be ≥ 1");
    return sample_lattice_ensemble(datum, lattice_spacing_for(datum.r, n), jitter, seed);
}

// ---------------------------------------------------------------------------

void apply_laplacian(const SpatialGrid& g, const double* in, double* out) {
    const int n = g.n;
    const double ih2 = 1.0 / (g.h * g.h);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const int m = g.index(i, j, k);
                const int ii[3] = {i, j, k};
                const int stride[3] = {n * n, n, 1};
                for (int c = 0; c < 3; ++c) {
                    double acc = 0;
                    const double b = in[m * 3 + c];
                    for (int a = 0; a < 3; ++a) {
                        if (ii[a] > 0) acc += b - in[(m - stride[a]) * 3 + c];
                        if (ii[a] < n - 1) acc += b - in[(m + stride[a]) * 3 + c];
                    }
                    out[m * 3 + c] = acc * ih2;
                }
            }
}

double value_sq(const SpatialGrid& g, const double* in) {
    double s = 0;
    for (int i = 0; i < g.size() * 3; ++i) s += in[i] * in[i];
    return s * g.cell_volume();
}

double grad_sq(const SpatialGrid& g, const double* in) {
    const int n = g.n;
    const int stride[3] = {n * n, n, 1};
    double s = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const int ii[3] = {i, j, k};
                const int m = g.index(i, j, k);
                for (int a = 0; a < 3; ++a) {
                    if (ii[a] == n - 1) continue;
                    for (int c = 0; c < 3; ++c) {
                        const double d = in[(m + stride[a]) * 3 + c] - in[m * 3 + c];
                        s += d * d;
                    }
                }
            }
    return s * g.h;  // (d/h)^2 * h^3
}

double hessian_sq(const SpatialGrid& g, const double* in) {
    const int n = g.n;
    std::vector<double> tmp(static_cast<size_t>(g.size()) * 3);
    const int stride[3] = {n * n, n, 1};
    const double ih2 = 1.0 / (g.h * g.h);
    double s = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const int ii[3] = {i, j, k};
                const int m = g.index(i, j, k);
                for (int a = 0; a < 3; ++a) {
                    // pure second difference with one-sided (mirror) closure at the ends
                    for (int c = 0; c < 3; ++c) {
                        const double b = in[m * 3 + c];
                        double acc = 0;
                        if (ii[a] > 0) acc += b - in[(m - stride[a]) * 3 + c];
                        if (ii[a] < n - 1) acc += b - in[(m + stride[a]) * 3 + c];
                        acc *= ih2;
                        s += acc * acc;
                    }
                    // mixed differences on cells of the (a,b) plane, counted for both orders
                    for (int b2 = a + 1; b2 < 3; ++b2) {
                        if (ii[a] == n - 1 || ii[b2] == n - 1) continue;
                        for (int c = 0; c < 3; ++c) {
                            const double d = in[(m + stride[a] + stride[b2]) * 3 + c] - in[(m + stride[a]) * 3 + c] -
                                             in[(m + stride[b2]) * 3 + c] + in[m * 3 + c];
                            s += 2.0 * d * d * ih2 * ih2;
                        }
                    }
                }
            }
    return s * g.cell_volume();
}

double l2_inner(const ControlField& a, const ControlField& b) {
    if (!a.compatible(b)) throw Error("grid mismatch");
    double s = 0;
    const size_t sl = a.slice_size();
    for (int k = 0; k < a.time.nodes(); ++k) {
        double sk = 0;
        const double* pa = a.at(k, 0);
        const double* pb = b.at(k, 0);
        for (size_t i = 0; i < sl; ++i) sk += pa[i] * pb[i];
        s += a.time.weight(k) * sk;
    }
    return s * a.grid.cell_volume();
}

double grad_inner(const ControlField& a, const ControlField& b) {
    if (!a.compatible(b)) throw Error("grid mismatch");
    std::vector<double> lb(b.slice_size());
    double s = 0;
    for (int k = 0; k < a.time.nodes(); ++k) {
        apply_laplacian(b.grid, b.at(k, 0), lb.data());
        double sk = 0;
        const double* pa = a.at(k, 0);
        for (size_t i = 0; i < lb.size(); ++i) sk += pa[i] * lb[i];
        s += a.time.weight(k) * sk;
    }
    return s * a.grid.cell_volume();
}

double v_norm(const ControlField& B) {
    double s = 0;
    for (int k = 0; k < B.time.nodes(); ++k) {
        const double* p = B.at(k, 0);
        s += B.time.weight(k) * (value_sq(B.grid, p) + grad_sq(B.grid, p) + hessian_sq(B.grid, p));
    }
    return std::sqrt(s);
}

namespace {
// y = (I + L + L^2) x on one slice
void apply_v_operator(const SpatialGrid& g, const double* x, double* y) {
    std::vector<double> l1(g.size() * 3), l2(g.size() * 3);
    apply_laplacian(g, x, l1.data());
    apply_laplacian(g, l1.data(), l2.data());
    for (int i = 0; i < g.size() * 3; ++i) y[i] = x[i] + l1[i] + l2[i];
}
}  // namespace

double v_inner(const ControlField& a, const ControlField& b) {
    if (!a.compatible(b)) throw Error("grid mismatch");
    std::vector<double> y(b.slice_size());
    double s = 0;
    for (int k = 0; k < a.time.nodes(); ++k) {
        apply_v_operator(b.grid, b.at(k, 0), y.data());
        double sk = 0;
        const double* pa = a.at(k, 0);
        for (size_t i = 0; i < y.size(); ++i) sk += pa[i] * y[i];
        s += a.time.weight(k) * sk;
    }
    return s * a.grid.cell_volume();
}

ControlField v_riesz(const ControlField& G) {
    const SpatialGrid& g = G.grid;
    const int n = g.n;
    const int N = g.size();
    ControlField out(G.time, g);
    std::vector<double> buf(N);
    fftw_plan fwd = fftw_plan_r2r_3d(n, n, n, buf.data(), buf.data(), FFTW_REDFT10, FFTW_REDFT10, FFTW_REDFT10,
                                     FFTW_ESTIMATE);
    fftw_plan inv = fftw_plan_r2r_3d(n, n, n, buf.data(), buf.data(), FFTW_REDFT01, FFTW_REDFT01, FFTW_REDFT01,
                                     FFTW_ESTIMATE);
    std::vector<double> mu1(n);
    for (int q = 0; q < n; ++q) mu1[q] = (2.0 - 2.0 * std::cos(std::numbers::pi * q / n)) / (g.h * g.h);
    const double norm = 1.0 / (8.0 * n * n * n);
    for (int k = 0; k < G.time.nodes(); ++k) {
        for (int c = 0; c < 3; ++c) {
            const double* src = G.at(k, 0);
            for (int m = 0; m < N; ++m) buf[m] = src[m * 3 + c];
            fftw_execute(fwd);
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b)
                    for (int d = 0; d < n; ++d) {
                        const double mu = mu1[a] + mu1[b] + mu1[d];
                        buf[g.index(a, b, d)] *= norm / (1.0 + mu + mu * mu);
                    }
            fftw_execute(inv);
            double* dst = out.at(k, 0);
            for (int m = 0; m < N; ++m) dst[m * 3 + c] = buf[m];
        }
    }
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
    return out;
}

double dual_norm(const ControlField& G) { return std::sqrt(std::max(0.0, l2_inner(G, v_riesz(G)))); }

ControlField neg_laplacian(const ControlField& B) {
    ControlField out(B.time, B.grid);
    for (int k = 0; k < B.time.nodes(); ++k) apply_laplacian(B.grid, B.at(k, 0), out.at(k, 0));
    return out;
}

std::vector<double> lattice_green_table(int n) {
    if (n < 1) throw Error("invalid argument", "lattice green table needs n >= 1");
    // periodic solve with a neutralising background, then remove the background's r^2/(6V) and the constant
    int M = 128;
    while (M < 8 * n) M *= 2;
    const int Mh = M / 2 + 1;
    const size_t nc = static_cast<size_t>(M) * M * Mh;
    fftw_complex* spec = fftw_alloc_complex(nc);
    std::vector<double> real(static_cast<size_t>(M) * M * M);
    std::vector<double> lam(M);
    for (int q = 0; q < M; ++q) lam[q] = 2.0 - 2.0 * std::cos(2.0 * std::numbers::pi * q / M);
    for (int a = 0; a < M; ++a)
        for (int b = 0; b < M; ++b)
            for (int c = 0; c < Mh; ++c) {
                const size_t id = (static_cast<size_t>(a) * M + b) * Mh + c;
                const double l = lam[a] + lam[b] + lam[c];
                spec[id][0] = l > 0 ? 1.0 / l : 0.0;
                spec[id][1] = 0.0;
            }
    fftw_plan plan = fftw_plan_dft_c2r_3d(M, M, M, spec, real.data(), FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
    fftw_free(spec);
    const double V = static_cast<double>(M) * M * M;
    // Watson's integral / 6
    constexpr double g0 = 0.2527310098586630;
    const double shift = real[0] / V - g0;
    std::vector<double> out(static_cast<size_t>(n) * n * n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c) {
                const double r2 = double(a) * a + double(b) * b + double(c) * c;
                out[(static_cast<size_t>(a) * n + b) * n + c] =
                    real[(static_cast<size_t>(a) * M + b) * M + c] / V - r2 / (6.0 * V) - shift;
            }
    return out;
}

namespace {

struct ExteriorClosure {
    std::vector<int> boundary;
    Eigen::MatrixXd C;  // unit lattice, boundary x boundary
};

std::shared_ptr<const ExteriorClosure> build_closure(int n) {
    auto cl = std::make_shared<ExteriorClosure>();
    auto on_boundary = [n](int i) { return i == 0 || i == n - 1; };
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                if (on_boundary(i) || on_boundary(j) || on_boundary(k)) cl->boundary.push_back((i * n + j) * n + k);
    const std::vector<double> tab = lattice_green_table(n);
    auto green = [&](int p, int q) {
        const int a = std::abs(p / (n * n) - q / (n * n));
        const int b = std::abs((p / n) % n - (q / n) % n);
        const int c = std::abs(p % n - q % n);
        return tab[(static_cast<size_t>(a) * n + b) * n + c];
    };
    const int nb = static_cast<int>(cl->boundary.size());
    Eigen::MatrixXd Gbb(nb, nb), Mbb(nb, nb);
    for (int r = 0; r < nb; ++r) {
        const int p = cl->boundary[r];
        const int pi = p / (n * n), pj = (p / n) % n, pk = p % n;
        int nbr[6], cnt = 0;
        if (pi > 0) nbr[cnt++] = p - n * n;
        if (pi < n - 1) nbr[cnt++] = p + n * n;
        if (pj > 0) nbr[cnt++] = p - n;
        if (pj < n - 1) nbr[cnt++] = p + n;
        if (pk > 0) nbr[cnt++] = p - 1;
        if (pk < n - 1) nbr[cnt++] = p + 1;
        for (int s = 0; s < nb; ++s) {
            const int q = cl->boundary[s];
            Gbb(r, s) = green(p, q);
            double v = 6.0 * green(p, q) - (r == s ? 1.0 : 0.0);
            for (int t = 0; t < cnt; ++t) v -= green(nbr[t], q);
            Mbb(r, s) = v;
        }
    }
    // C = M G^-1, G symmetric
    Eigen::MatrixXd Ct = Gbb.llt().solve(Mbb.transpose());
    cl->C = 0.5 * (Ct + Ct.transpose());
    return cl;
}

std::shared_ptr<const ExteriorClosure> closure_for(int n) {
    static std::mutex mu;
    static std::map<int, std::shared_ptr<const ExteriorClosure>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    auto cl = build_closure(n);
    cache.emplace(n, cl);
    return cl;
}

}  // namespace

void apply_exterior_laplacian(const SpatialGrid& g, const double* in, double* out) {
    const int n = g.n;
    const double ih2 = 1.0 / (g.h * g.h);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const int m = g.index(i, j, k);
                for (int c = 0; c < 3; ++c) {
                    double acc = 6.0 * in[m * 3 + c];
                    if (i > 0) acc -= in[g.index(i - 1, j, k) * 3 + c];
                    if (i < n - 1) acc -= in[g.index(i + 1, j, k) * 3 + c];
                    if (j > 0) acc -= in[g.index(i, j - 1, k) * 3 + c];
                    if (j < n - 1) acc -= in[g.index(i, j + 1, k) * 3 + c];
                    if (k > 0) acc -= in[g.index(i, j, k - 1) * 3 + c];
                    if (k < n - 1) acc -= in[g.index(i, j, k + 1) * 3 + c];
                    out[m * 3 + c] = acc * ih2;
                }
            }
    const auto cl = closure_for(n);
    const int nb = static_cast<int>(cl->boundary.size());
    Eigen::MatrixXd xb(nb, 3);
    for (int r = 0; r < nb; ++r)
        for (int c = 0; c < 3; ++c) xb(r, c) = in[cl->boundary[r] * 3 + c];
    const Eigen::MatrixXd yb = cl->C * xb;
    for (int r = 0; r < nb; ++r)
        for (int c = 0; c < 3; ++c) out[cl->boundary[r] * 3 + c] -= yb(r, c) * ih2;
}

double reg_inner(const ControlField& a, const ControlField& b) {
    if (!a.compatible(b)) throw Error("grid mismatch");
    std::vector<double> y(b.slice_size());
    double s = 0;
    for (int k = 0; k < a.time.nodes(); ++k) {
        apply_exterior_laplacian(b.grid, b.at(k, 0), y.data());
        const double* pa = a.at(k, 0);
        double sk = 0;
        for (size_t i = 0; i < y.size(); ++i) sk += pa[i] * y[i];
        s += a.time.weight(k) * sk;
    }
    return s * a.grid.cell_volume();
}

ControlField reg_laplacian(const ControlField& B) {
    ControlField out(B.time, B.grid);
    for (int k = 0; k < B.time.nodes(); ++k) apply_exterior_laplacian(B.grid, B.at(k, 0), out.at(k, 0));
    return out;
}

}  // namespace vpc
