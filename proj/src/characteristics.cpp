#include "vpc/characteristics.hpp"

#include <Eigen/Dense>

#include <algorithm>

namespace vpc {

Vec3 AccelHistory::eval(int interval, const Vec3& x, Mat3* jac) const {
    Vec3 out{0, 0, 0};
    const double* A = slice(std::clamp(interval, 0, time.steps - 1));
    int idx[8];
    double w[8];
    if (!jac) {
        if (!grid.stencil(x, idx, w)) return out;
        for (int c = 0; c < 8; ++c)
            for (int d = 0; d < 3; ++d) out[d] += w[c] * A[idx[c] * 3 + d];
        return out;
    }
    double dw[8][3];
    jac->fill(0.0);
    if (!grid.stencil_grad(x, idx, w, dw)) return out;
    for (int c = 0; c < 8; ++c)
        for (int d = 0; d < 3; ++d) {
            const double a = A[idx[c] * 3 + d];
            out[d] += w[c] * a;
            for (int e = 0; e < 3; ++e) (*jac)[d * 3 + e] += dw[c][e] * a;
        }
    return out;
}

double AccelHistory::l2_linf() const {
    double s = 0;
    for (int k = 0; k < time.steps; ++k) {
        const double* A = slice(k);
        double mx = 0;
        for (int m = 0; m < grid.size(); ++m)
            mx = std::max(mx, A[m * 3] * A[m * 3] + A[m * 3 + 1] * A[m * 3 + 1] + A[m * 3 + 2] * A[m * 3 + 2]);
        s += time.dt * mx;
    }
    return std::sqrt(s);
}

FlowField FlowField::from_history(const AccelHistory* A, const ControlField* B) {
    FlowField F;
    F.time = A ? A->time : B->time;
    if (A) F.accel = [A](int k, double, const Vec3& x, Mat3* jac) { return A->eval(k, x, jac); };
    F.B = B;
    return F;
}

int FlowField::interval_of(double t) const {
    return std::clamp(static_cast<int>(std::floor(t / time.dt)), 0, time.steps - 1);
}

Vec6 transport_rhs(const FlowField& F, int interval, double t, const Vec6& z, Mat6* DF) {
    const Vec3 x = pos(z), v = vel(z);
    Mat3 JA{}, JB{};
    Vec3 a{0, 0, 0}, b{0, 0, 0};
    if (F.accel) a = F.accel(interval, t, x, DF ? &JA : nullptr);
    if (F.B) b = DF ? F.B->eval_grad(t, x, JB) : F.B->eval(t, x);
    const Vec3 vb = cross(v, b);
    if (DF) {
        Mat6& M = *DF;
        M.fill(0.0);
        M[0 * 6 + 3] = M[1 * 6 + 4] = M[2 * 6 + 5] = 1.0;
        for (int l = 0; l < 3; ++l) {
            const Vec3 dB{JB[0 * 3 + l], JB[1 * 3 + l], JB[2 * 3 + l]};
            const Vec3 c = cross(v, dB);
            for (int i = 0; i < 3; ++i) M[(3 + i) * 6 + l] = JA[i * 3 + l] + c[i];
        }
        // d(v x B)/dv
        M[3 * 6 + 4] = b[2];
        M[3 * 6 + 5] = -b[1];
        M[4 * 6 + 3] = -b[2];
        M[4 * 6 + 5] = b[0];
        M[5 * 6 + 3] = b[1];
        M[5 * 6 + 4] = -b[0];
    }
    return {v[0], v[1], v[2], a[0] + vb[0], a[1] + vb[1], a[2] + vb[2]};
}

namespace {
inline Vec6 axpy6(const Vec6& z, double s, const Vec6& k) {
    Vec6 r;
    for (int i = 0; i < 6; ++i) r[i] = z[i] + s * k[i];
    return r;
}
inline Mat6 axpy36(const Mat6& a, double s, const Mat6& b) {
    Mat6 r;
    for (int i = 0; i < 36; ++i) r[i] = a[i] + s * b[i];
    return r;
}
}  // namespace

Mat6 matmul6(const Mat6& a, const Mat6& b) {
    Mat6 r{};
    for (int i = 0; i < 6; ++i)
        for (int k = 0; k < 6; ++k) {
            const double aik = a[i * 6 + k];
            if (aik == 0.0) continue;
            for (int j = 0; j < 6; ++j) r[i * 6 + j] += aik * b[k * 6 + j];
        }
    return r;
}

Mat6 transpose6(const Mat6& a) {
    Mat6 r;
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) r[j * 6 + i] = a[i * 6 + j];
    return r;
}

Vec6 matvec6(const Mat6& a, const Vec6& x) {
    Vec6 r{};
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) r[i] += a[i * 6 + j] * x[j];
    return r;
}

Vec6 matTvec6(const Mat6& a, const Vec6& x) {
    Vec6 r{};
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) r[j] += a[i * 6 + j] * x[i];
    return r;
}

double det6(const Mat6& a) {
    Eigen::Map<const Eigen::Matrix<double, 6, 6, Eigen::RowMajor>> m(a.data());
    return m.determinant();
}

Mat6 inverse6(const Mat6& a) {
    Eigen::Map<const Eigen::Matrix<double, 6, 6, Eigen::RowMajor>> m(a.data());
    Eigen::Matrix<double, 6, 6, Eigen::RowMajor> inv = m.partialPivLu().inverse();
    Mat6 r;
    Eigen::Map<Eigen::Matrix<double, 6, 6, Eigen::RowMajor>>(r.data()) = inv;
    return r;
}

Vec6 rk4_step(const FlowField& F, int interval, double t, double h, const Vec6& z, Mat6* jac) {
    if (!jac) {
        const Vec6 k1 = transport_rhs(F, interval, t, z);
        const Vec6 k2 = transport_rhs(F, interval, t + 0.5 * h, axpy6(z, 0.5 * h, k1));
        const Vec6 k3 = transport_rhs(F, interval, t + 0.5 * h, axpy6(z, 0.5 * h, k2));
        const Vec6 k4 = transport_rhs(F, interval, t + h, axpy6(z, h, k3));
        Vec6 r;
        for (int i = 0; i < 6; ++i) r[i] = z[i] + h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
        if (!finite6(r)) throw Error("blow-up", "non-finite characteristic state");
        return r;
    }
    // RK4 on (z, J) with J(t) = I: yields the exact derivative of the discrete step.
    Mat6 D1, D2, D3, D4;
    const Mat6 I = identity6();
    const Vec6 k1 = transport_rhs(F, interval, t, z, &D1);
    const Mat6 K1 = D1;
    const Vec6 k2 = transport_rhs(F, interval, t + 0.5 * h, axpy6(z, 0.5 * h, k1), &D2);
    const Mat6 K2 = matmul6(D2, axpy36(I, 0.5 * h, K1));
    const Vec6 k3 = transport_rhs(F, interval, t + 0.5 * h, axpy6(z, 0.5 * h, k2), &D3);
    const Mat6 K3 = matmul6(D3, axpy36(I, 0.5 * h, K2));
    const Vec6 k4 = transport_rhs(F, interval, t + h, axpy6(z, h, k3), &D4);
    const Mat6 K4 = matmul6(D4, axpy36(I, h, K3));
    Vec6 r;
    for (int i = 0; i < 6; ++i) r[i] = z[i] + h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    for (int i = 0; i < 36; ++i) (*jac)[i] = I[i] + h / 6.0 * (K1[i] + 2 * K2[i] + 2 * K3[i] + K4[i]);
    if (!finite6(r)) throw Error("blow-up", "non-finite characteristic state");
    return r;
}

Vec6 node_step(const FlowField& F, int k, bool forward, const Vec6& z, Mat6* jac) {
    const double t0 = F.time.t(k), t1 = F.time.t(k + 1);
    return forward ? rk4_step(F, k, t0, t1 - t0, z, jac) : rk4_step(F, k, t1, t0 - t1, z, jac);
}

Vec6 flow(const FlowField& F, double t, const Vec6& z, double s) {
    if (t == s) return z;
    const TimeGrid& tg = F.time;
    Vec6 cur = z;
    double tc = t;
    const double eps = 1e-12 * tg.T;
    if (s > t) {
        while (tc < s - eps) {
            const int k = F.interval_of(tc + eps);
            const double tend = std::min(s, tg.t(k + 1));
            cur = rk4_step(F, k, tc, tend - tc, cur);
            tc = tend;
        }
    } else {
        while (tc > s + eps) {
            const int k = F.interval_of(tc - eps);
            const double tend = std::max(s, tg.t(k));
            cur = rk4_step(F, k, tc, tend - tc, cur);
            tc = tend;
        }
    }
    return cur;
}

Mat6 flow_jacobian(const FlowField& F, double t, const Vec6& z, double s, double h_fd) {
    if (!(h_fd > 0)) throw Error("invalid argument", "h_fd must be > 0");
    if (s == t) return identity6();
    Mat6 J;
    for (int j = 0; j < 6; ++j) {
        Vec6 zp = z, zm = z;
        zp[j] += h_fd;
        zm[j] -= h_fd;
        const Vec6 a = flow(F, t, zp, s), b = flow(F, t, zm, s);
        for (int i = 0; i < 6; ++i) J[i * 6 + j] = (a[i] - b[i]) / (2 * h_fd);
    }
    return J;
}

double zeta(double r, double T, double a_norm) { return std::exp(2.0 * T) * (r + std::sqrt(T) * a_norm); }

}  // namespace vpc
