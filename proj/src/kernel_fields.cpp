#include "vpc/kernel_fields.hpp"

#include <fftw3.h>
#include <omp.h>

#include <cstring>
#include <numbers>

namespace vpc {

namespace {
template <class F>
void for_each_index(int n, Exec ex, F&& fn) {
    if (ex == Exec::parallel) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i) fn(i);
    } else {
        for (int i = 0; i < n; ++i) fn(i);
    }
}
}  // namespace

MollifiedKernel::MollifiedKernel(double e) : eps(e) {
    if (!(e > 0)) throw Error("invalid kernel", "eps_kernel must be > 0");
}

Mat3 MollifiedKernel::hessian(const Vec3& d) const {
    const double s = dot(d, d) + eps * eps;
    const double s32 = 1.0 / (s * std::sqrt(s));
    const double s52 = s32 / s;
    Mat3 H;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) H[i * 3 + j] = (i == j ? -s32 : 0.0) + 3.0 * d[i] * d[j] * s52;
    return H;
}

double psi(const ParticleEnsemble& e, const Vec3& x, const MollifiedKernel& k) {
    if (e.size() == 0) throw Error("empty ensemble");
    double s = 0;
    for (size_t i = 0; i < e.size(); ++i) s += e.w[i] * e.f[i] * k.value(x - pos(e.z[i]));
    return s;
}

Vec3 grad_psi(const ParticleEnsemble& e, const Vec3& x, const MollifiedKernel& k) {
    if (e.size() == 0) throw Error("empty ensemble");
    Vec3 s{0, 0, 0};
    for (size_t i = 0; i < e.size(); ++i) {
        const Vec3 g = k.grad(x - pos(e.z[i]));
        const double q = e.w[i] * e.f[i];
        s[0] += q * g[0];
        s[1] += q * g[1];
        s[2] += q * g[2];
    }
    return s;
}

std::vector<double> psi_many(const ParticleEnsemble& e, const std::vector<Vec3>& xs, const MollifiedKernel& k, Exec ex) {
    if (e.size() == 0) throw Error("empty ensemble");
    std::vector<double> out(xs.size());
    for_each_index(static_cast<int>(xs.size()), ex, [&](int i) { out[i] = psi(e, xs[i], k); });
    return out;
}

std::vector<Vec3> grad_psi_many(const ParticleEnsemble& e, const std::vector<Vec3>& xs, const MollifiedKernel& k,
                                Exec ex) {
    if (e.size() == 0) throw Error("empty ensemble");
    std::vector<Vec3> out(xs.size());
    for_each_index(static_cast<int>(xs.size()), ex, [&](int i) { out[i] = grad_psi(e, xs[i], k); });
    return out;
}

double phi_field(const ParticleEnsemble& f, const std::vector<Vec3>& dva, const Vec3& x, const MollifiedKernel& k) {
    if (dva.size() != f.size()) throw Error("missing gradient", "coefficient a has no v-gradient at every marker");
    double s = 0;
    for (size_t i = 0; i < f.size(); ++i) s += f.w[i] * f.f[i] * dot(dva[i], k.grad(x - pos(f.z[i])));
    return s;
}

std::vector<double> phi_field_many(const ParticleEnsemble& f, const std::vector<Vec3>& dva, const std::vector<Vec3>& xs,
                                   const MollifiedKernel& k, Exec ex) {
    if (dva.size() != f.size()) throw Error("missing gradient", "coefficient a has no v-gradient at every marker");
    std::vector<double> out(xs.size());
    for_each_index(static_cast<int>(xs.size()), ex, [&](int i) { out[i] = phi_field(f, dva, xs[i], k); });
    return out;
}

Vec3 phi_prime(const ParticleEnsemble& f, const std::vector<Vec6>& grad_f, const std::vector<Vec6>& grad_a,
               const Vec3& x, const MollifiedKernel& k) {
    if (grad_f.size() != f.size() || grad_a.size() != f.size())
        throw Error("missing gradient", "phi_prime needs z-gradients of a and f at every marker");
    Vec3 out{0, 0, 0};
    for (size_t i = 0; i < f.size(); ++i) {
        const Vec3 g = k.grad(x - pos(f.z[i]));
        const Vec6& df = grad_f[i];
        const Vec6& da = grad_a[i];
        for (int j = 0; j < 3; ++j) {
            double s = 0;
            for (int c = 0; c < 3; ++c) s += (da[3 + c] * df[j] - df[3 + c] * da[j]) * g[c];
            out[j] += f.w[i] * s;
        }
    }
    return out;
}

std::vector<double> control_from_fg(const ParticleEnsemble& f, const std::vector<Vec6>& grad_g, double lambda,
                                    const SpatialGrid& grid, const MollifiedKernel& k, Exec ex) {
    if (!(lambda > 0)) throw Error("representation undefined", "lambda must be > 0");
    if (grad_g.size() != f.size()) throw Error("missing gradient", "g gradients must match the f markers");
    std::vector<Vec3> src(f.size());
    for (size_t i = 0; i < f.size(); ++i) {
        const Vec3 c = cross(vel(f.z[i]), Vec3{grad_g[i][3], grad_g[i][4], grad_g[i][5]});
        src[i] = (f.w[i] * f.f[i]) * c;
    }
    const double pref = 1.0 / (4.0 * std::numbers::pi * lambda);
    std::vector<double> out(static_cast<size_t>(grid.size()) * 3, 0.0);
    for_each_index(grid.size(), ex, [&](int m) {
        const Vec3 X = grid.node(m);
        Vec3 s{0, 0, 0};
        for (size_t i = 0; i < f.size(); ++i) {
            const double kv = k.value(X - pos(f.z[i]));
            s[0] += kv * src[i][0];
            s[1] += kv * src[i][1];
            s[2] += kv * src[i][2];
        }
        for (int c = 0; c < 3; ++c) out[m * 3 + c] = pref * s[c];
    });
    return out;
}

std::vector<double> control_from_fg_direct(const ParticleEnsemble& f, const std::vector<Vec6>& grad_f,
                                           const std::vector<double>& g, double lambda, const SpatialGrid& grid,
                                           const MollifiedKernel& k, Exec ex) {
    if (!(lambda > 0)) throw Error("representation undefined", "lambda must be > 0");
    if (grad_f.size() != f.size() || g.size() != f.size()) throw Error("missing gradient");
    std::vector<Vec3> src(f.size());
    for (size_t i = 0; i < f.size(); ++i) {
        const Vec3 c = cross(vel(f.z[i]), Vec3{grad_f[i][3], grad_f[i][4], grad_f[i][5]});
        src[i] = (f.w[i] * g[i]) * c;
    }
    const double pref = -1.0 / (4.0 * std::numbers::pi * lambda);
    std::vector<double> out(static_cast<size_t>(grid.size()) * 3, 0.0);
    for_each_index(grid.size(), ex, [&](int m) {
        const Vec3 X = grid.node(m);
        Vec3 s{0, 0, 0};
        for (size_t i = 0; i < f.size(); ++i) {
            const double kv = k.value(X - pos(f.z[i]));
            for (int c = 0; c < 3; ++c) s[c] += kv * src[i][c];
        }
        for (int c = 0; c < 3; ++c) out[m * 3 + c] = pref * s[c];
    });
    return out;
}

// ---------------------------------------------------------------------------

GridConvolver::GridConvolver(const SpatialGrid& g, const MollifiedKernel& k) : grid_(g), kernel_(k), P_(2 * g.n) {
    nreal_ = static_cast<size_t>(P_) * P_ * P_;
    ncplx_ = static_cast<size_t>(P_) * P_ * (P_ / 2 + 1);
    rbuf_ = fftw_alloc_real(nreal_);
    cbuf_ = fftw_alloc_complex(ncplx_);
    accum_ = fftw_alloc_complex(ncplx_);
    auto* cb = static_cast<fftw_complex*>(cbuf_);
    auto* ac = static_cast<fftw_complex*>(accum_);
    plan_r2c_ = fftw_plan_dft_r2c_3d(P_, P_, P_, rbuf_, cb, FFTW_ESTIMATE);
    plan_c2r_ = fftw_plan_dft_c2r_3d(P_, P_, P_, ac, rbuf_, FFTW_ESTIMATE);
    const int n = g.n;
    for (int p = 0; p < static_cast<int>(KernelPart::count); ++p) {
        for (int a = 0; a < P_; ++a)
            for (int b = 0; b < P_; ++b)
                for (int c = 0; c < P_; ++c) {
                    const int o[3] = {a, b, c};
                    double val = 0;
                    bool ok = true;
                    Vec3 d;
                    for (int ax = 0; ax < 3; ++ax) {
                        int off = o[ax] < n ? o[ax] : o[ax] - P_;
                        if (o[ax] == n) ok = false;
                        d[ax] = off * g.h;
                    }
                    if (ok) val = kernel_part(static_cast<KernelPart>(p), d);
                    rbuf_[(static_cast<size_t>(a) * P_ + b) * P_ + c] = val;
                }
        fftw_execute(static_cast<fftw_plan>(plan_r2c_));
        auto* spec = fftw_alloc_complex(ncplx_);
        std::memcpy(spec, cb, sizeof(fftw_complex) * ncplx_);
        spectra_.push_back(spec);
    }
}

GridConvolver::~GridConvolver() {
    fftw_destroy_plan(static_cast<fftw_plan>(plan_r2c_));
    fftw_destroy_plan(static_cast<fftw_plan>(plan_c2r_));
    for (void* s : spectra_) fftw_free(s);
    fftw_free(rbuf_);
    fftw_free(cbuf_);
    fftw_free(accum_);
}

double GridConvolver::kernel_part(KernelPart p, const Vec3& d) const {
    switch (p) {
        case KernelPart::value: return kernel_.value(d);
        case KernelPart::d1: return kernel_.grad(d)[0];
        case KernelPart::d2: return kernel_.grad(d)[1];
        case KernelPart::d3: return kernel_.grad(d)[2];
        default: break;
    }
    const Mat3 H = kernel_.hessian(d);
    switch (p) {
        case KernelPart::d11: return H[0];
        case KernelPart::d12: return H[1];
        case KernelPart::d13: return H[2];
        case KernelPart::d22: return H[4];
        case KernelPart::d23: return H[5];
        case KernelPart::d33: return H[8];
        default: return 0.0;
    }
}

void GridConvolver::load_padded(const double* rho, int stride, int offset) {
    std::fill(rbuf_, rbuf_ + nreal_, 0.0);
    const int n = grid_.n;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c)
                rbuf_[(static_cast<size_t>(a) * P_ + b) * P_ + c] = rho[grid_.index(a, b, c) * stride + offset];
}

void GridConvolver::extract(double* out) const {
    const int n = grid_.n;
    const double s = 1.0 / static_cast<double>(nreal_);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c) out[grid_.index(a, b, c)] = s * rbuf_[(static_cast<size_t>(a) * P_ + b) * P_ + c];
}

void GridConvolver::convolve(const double* rho, const std::vector<KernelPart>& parts,
                             std::vector<std::vector<double>>& out) {
    load_padded(rho, 1, 0);
    fftw_execute(static_cast<fftw_plan>(plan_r2c_));
    auto* cb = static_cast<fftw_complex*>(cbuf_);
    auto* ac = static_cast<fftw_complex*>(accum_);
    out.resize(parts.size());
    for (size_t p = 0; p < parts.size(); ++p) {
        auto* sp = static_cast<fftw_complex*>(spectra_[static_cast<int>(parts[p])]);
        for (size_t i = 0; i < ncplx_; ++i) {
            ac[i][0] = cb[i][0] * sp[i][0] - cb[i][1] * sp[i][1];
            ac[i][1] = cb[i][0] * sp[i][1] + cb[i][1] * sp[i][0];
        }
        fftw_execute(static_cast<fftw_plan>(plan_c2r_));
        out[p].resize(grid_.size());
        extract(out[p].data());
    }
}

void GridConvolver::convolve_sum(const double* q3, const KernelPart parts[3], double* out) {
    auto* cb = static_cast<fftw_complex*>(cbuf_);
    auto* ac = static_cast<fftw_complex*>(accum_);
    std::fill(reinterpret_cast<double*>(ac), reinterpret_cast<double*>(ac) + 2 * ncplx_, 0.0);
    for (int c = 0; c < 3; ++c) {
        load_padded(q3, 3, c);
        fftw_execute(static_cast<fftw_plan>(plan_r2c_));
        auto* sp = static_cast<fftw_complex*>(spectra_[static_cast<int>(parts[c])]);
        for (size_t i = 0; i < ncplx_; ++i) {
            ac[i][0] += cb[i][0] * sp[i][0] - cb[i][1] * sp[i][1];
            ac[i][1] += cb[i][0] * sp[i][1] + cb[i][1] * sp[i][0];
        }
    }
    fftw_execute(static_cast<fftw_plan>(plan_c2r_));
    extract(out);
}

void GridConvolver::convolve_direct(const double* rho, KernelPart part, double* out, Exec ex) const {
    const int N = grid_.size();
    for_each_index(N, ex, [&](int m) {
        const Vec3 X = grid_.node(m);
        double s = 0;
        for (int q = 0; q < N; ++q) {
            if (rho[q] == 0.0) continue;
            s += kernel_part(part, X - grid_.node(q)) * rho[q];
        }
        out[m] = s;
    });
}

// ---------------------------------------------------------------------------

void DirectInteraction::grad_psi(const std::vector<Vec3>& x, const std::vector<double>& q, std::vector<Vec3>& out) {
    out.assign(x.size(), Vec3{0, 0, 0});
    const int n = static_cast<int>(x.size());
    for_each_index(n, ex_, [&](int i) {
        Vec3 s{0, 0, 0};
        for (int j = 0; j < n; ++j) {
            if (q[j] == 0.0) continue;
            const Vec3 g = k_.grad(x[i] - x[j]);
            for (int c = 0; c < 3; ++c) s[c] += q[j] * g[c];
        }
        out[i] = s;
    });
}

void DirectInteraction::phi(const std::vector<Vec3>& x, const std::vector<Vec3>& Q, std::vector<double>& out) {
    out.assign(x.size(), 0.0);
    const int n = static_cast<int>(x.size());
    for_each_index(n, ex_, [&](int i) {
        double s = 0;
        for (int j = 0; j < n; ++j) s += dot(Q[j], k_.grad(x[i] - x[j]));
        out[i] = s;
    });
}

void DirectInteraction::grad_phi(const std::vector<Vec3>& x, const std::vector<Vec3>& Q, std::vector<Vec3>& out) {
    out.assign(x.size(), Vec3{0, 0, 0});
    const int n = static_cast<int>(x.size());
    for_each_index(n, ex_, [&](int i) {
        Vec3 s{0, 0, 0};
        for (int j = 0; j < n; ++j) {
            const Mat3 H = k_.hessian(x[i] - x[j]);
            for (int a = 0; a < 3; ++a)
                for (int c = 0; c < 3; ++c) s[a] += H[a * 3 + c] * Q[j][c];
        }
        out[i] = s;
    });
}

GridInteraction::GridInteraction(const SpatialGrid& g, const MollifiedKernel& k, Exec ex) : conv_(g, k), ex_(ex) {}

void GridInteraction::deposit(const std::vector<Vec3>& x, const double* q, int ncomp, std::vector<double>& rho) const {
    const SpatialGrid& g = conv_.grid();
    rho.assign(static_cast<size_t>(g.size()) * ncomp, 0.0);
    const int n = static_cast<int>(x.size());
    const int nt = ex_ == Exec::parallel ? omp_get_max_threads() : 1;
    if (nt == 1) {
        int idx[8];
        double w[8];
        for (int i = 0; i < n; ++i) {
            if (!g.stencil(x[i], idx, w)) continue;
            for (int c = 0; c < 8; ++c)
                for (int d = 0; d < ncomp; ++d) rho[idx[c] * ncomp + d] += w[c] * q[i * ncomp + d];
        }
        return;
    }
    std::vector<std::vector<double>> local(nt, std::vector<double>(rho.size(), 0.0));
#pragma omp parallel num_threads(nt)
    {
        auto& r = local[omp_get_thread_num()];
        int idx[8];
        double w[8];
#pragma omp for schedule(static)
        for (int i = 0; i < n; ++i) {
            if (!g.stencil(x[i], idx, w)) continue;
            for (int c = 0; c < 8; ++c)
                for (int d = 0; d < ncomp; ++d) r[idx[c] * ncomp + d] += w[c] * q[i * ncomp + d];
        }
    }
    for (const auto& r : local)
        for (size_t i = 0; i < rho.size(); ++i) rho[i] += r[i];
}

void GridInteraction::interpolate(const std::vector<Vec3>& x, const std::vector<double>& field, int ncomp,
                                  double* out) const {
    const SpatialGrid& g = conv_.grid();
    for_each_index(static_cast<int>(x.size()), ex_, [&](int i) {
        int idx[8];
        double w[8];
        for (int d = 0; d < ncomp; ++d) out[i * ncomp + d] = 0.0;
        if (!g.stencil(x[i], idx, w)) return;
        for (int c = 0; c < 8; ++c)
            for (int d = 0; d < ncomp; ++d) out[i * ncomp + d] += w[c] * field[idx[c] * ncomp + d];
    });
}

void GridInteraction::grad_psi_grid(const std::vector<double>& rho, std::vector<double>& E3) {
    std::vector<std::vector<double>> parts;
    conv_.convolve(rho.data(), {KernelPart::d1, KernelPart::d2, KernelPart::d3}, parts);
    const int N = conv_.grid().size();
    E3.resize(static_cast<size_t>(N) * 3);
    for (int m = 0; m < N; ++m)
        for (int c = 0; c < 3; ++c) E3[m * 3 + c] = parts[c][m];
}

void GridInteraction::grad_psi(const std::vector<Vec3>& x, const std::vector<double>& q, std::vector<Vec3>& out) {
    std::vector<double> rho, E3;
    deposit(x, q.data(), 1, rho);
    grad_psi_grid(rho, E3);
    out.resize(x.size());
    interpolate(x, E3, 3, out.empty() ? nullptr : out[0].data());
}

void GridInteraction::phi(const std::vector<Vec3>& x, const std::vector<Vec3>& Q, std::vector<double>& out) {
    std::vector<double> rho;
    deposit(x, Q.empty() ? nullptr : Q[0].data(), 3, rho);
    std::vector<double> field(conv_.grid().size());
    const KernelPart parts[3] = {KernelPart::d1, KernelPart::d2, KernelPart::d3};
    conv_.convolve_sum(rho.data(), parts, field.data());
    out.resize(x.size());
    interpolate(x, field, 1, out.data());
}

void GridInteraction::grad_phi(const std::vector<Vec3>& x, const std::vector<Vec3>& Q, std::vector<Vec3>& out) {
    std::vector<double> rho;
    deposit(x, Q.empty() ? nullptr : Q[0].data(), 3, rho);
    const int N = conv_.grid().size();
    std::vector<double> field3(static_cast<size_t>(N) * 3), tmp(N);
    const KernelPart rows[3][3] = {{KernelPart::d11, KernelPart::d12, KernelPart::d13},
                                   {KernelPart::d12, KernelPart::d22, KernelPart::d23},
                                   {KernelPart::d13, KernelPart::d23, KernelPart::d33}};
    for (int a = 0; a < 3; ++a) {
        conv_.convolve_sum(rho.data(), rows[a], tmp.data());
        for (int m = 0; m < N; ++m) field3[m * 3 + a] = tmp[m];
    }
    out.resize(x.size());
    interpolate(x, field3, 3, out.empty() ? nullptr : out[0].data());
}

}  // namespace vpc
