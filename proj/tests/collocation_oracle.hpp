#pragma once

// Brute-force reference for the linear Vlasov solver on a tiny lattice.
// Characteristics of the linear field z' = (v, -kappa x + v x Bc) come from the matrix exponential,
// the coupling is assembled as dense pair sums, and all time levels are solved at once
// (implicit Euler, block-bidiagonal space-time matrix, dense LU).

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <array>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

using V6 = std::array<double, 6>;
using V3 = std::array<double, 3>;

struct LinearCase {
    double kappa = 1.0;
    V3 Bc{0, 0, 0};
    double eps = 0.3;  // K(d) = 1/sqrt(|d|^2 + eps^2)
    double T = 0.2;
    int steps = 4;
    bool final_value = false;
    std::vector<V6> nodes;  // positions at the reference time (t = 0, or t = T for final_value)
    std::vector<double> w;
    std::function<double(const V6&)> datum, b, chi;
    std::function<V3(const V6&)> C, dva;  // empty: zero
};

inline Eigen::Matrix<double, 6, 6> generator(const LinearCase& c) {
    Eigen::Matrix<double, 6, 6> M = Eigen::Matrix<double, 6, 6>::Zero();
    for (int a = 0; a < 3; ++a) {
        M(a, 3 + a) = 1.0;
        M(3 + a, a) = -c.kappa;
    }
    // (v x B)_0 = v1 B2 - v2 B1, ...
    const V3& B = c.Bc;
    M(3, 4) += B[2];
    M(3, 5) -= B[1];
    M(4, 5) += B[0];
    M(4, 3) -= B[2];
    M(5, 3) += B[1];
    M(5, 4) -= B[0];
    return M;
}

// positions[k][j]
inline std::vector<std::vector<V6>> paths(const LinearCase& c) {
    const Eigen::Matrix<double, 6, 6> M = generator(c);
    const double dt = c.T / c.steps;
    std::vector<std::vector<V6>> P(c.steps + 1, std::vector<V6>(c.nodes.size()));
    const double t_ref = c.final_value ? c.T : 0.0;
    for (int k = 0; k <= c.steps; ++k) {
        const Eigen::Matrix<double, 6, 6> E = (M * (k * dt - t_ref)).exp();
        for (size_t j = 0; j < c.nodes.size(); ++j) {
            Eigen::Matrix<double, 6, 1> z0;
            for (int a = 0; a < 6; ++a) z0[a] = c.nodes[j][a];
            const Eigen::Matrix<double, 6, 1> z = E * z0;
            for (int a = 0; a < 6; ++a) P[k][j][a] = z[a];
        }
    }
    return P;
}

inline V3 grad_kernel(const V3& d, double eps) {
    const double s = d[0] * d[0] + d[1] * d[1] + d[2] * d[2] + eps * eps;
    const double q = -1.0 / (s * std::sqrt(s));
    return {q * d[0], q * d[1], q * d[2]};
}

// f[k][j]
inline std::vector<std::vector<double>> solve(const LinearCase& c) {
    const int n = static_cast<int>(c.nodes.size());
    const int N = c.steps;
    const double dt = c.T / N;
    const auto P = paths(c);
    const int dim = (N + 1) * n;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);

    // coupling operator at level k: (Mk f)_i = sum_j w_j f_j (C_i + chi_i dva_j) . gradK(x_i - x_j)
    auto coupling = [&](int k, int row0, int col0, double scale) {
        for (int i = 0; i < n; ++i) {
            const V6& zi = P[k][i];
            const V3 Ci = c.C ? c.C(zi) : V3{0, 0, 0};
            const double chii = c.chi ? c.chi(zi) : 1.0;
            for (int j = 0; j < n; ++j) {
                const V6& zj = P[k][j];
                const V3 d{zi[0] - zj[0], zi[1] - zj[1], zi[2] - zj[2]};
                const V3 g = grad_kernel(d, c.eps);
                const V3 dv = c.dva ? c.dva(zj) : V3{0, 0, 0};
                double e = 0;
                for (int a = 0; a < 3; ++a) e += (Ci[a] + chii * dv[a]) * g[a];
                A(row0 + i, col0 + j) += scale * c.w[j] * e;
            }
        }
    };
    auto src = [&](int k, int i) { return c.b ? c.b(P[k][i]) : 0.0; };

    if (!c.final_value) {
        for (int i = 0; i < n; ++i) {
            A(i, i) = 1.0;
            rhs[i] = c.datum(P[0][i]);
        }
        // f^{k+1} - f^k - dt M_{k+1} f^{k+1} = dt b^{k+1}
        for (int k = 0; k < N; ++k) {
            const int r = (k + 1) * n;
            for (int i = 0; i < n; ++i) {
                A(r + i, r + i) += 1.0;
                A(r + i, k * n + i) -= 1.0;
                rhs[r + i] = dt * src(k + 1, i);
            }
            coupling(k + 1, r, r, -dt);
        }
    } else {
        const int r0 = N * n;
        for (int i = 0; i < n; ++i) {
            A(r0 + i, r0 + i) = 1.0;
            rhs[r0 + i] = c.datum(P[N][i]);
        }
        // f^k - f^{k+1} + dt M_k f^k = -dt b^k
        for (int k = N - 1; k >= 0; --k) {
            const int r = k * n;
            for (int i = 0; i < n; ++i) {
                A(r + i, r + i) += 1.0;
                A(r + i, (k + 1) * n + i) -= 1.0;
                rhs[r + i] = -dt * src(k, i);
            }
            coupling(k, r, r, dt);
        }
    }
    const Eigen::VectorXd f = A.partialPivLu().solve(rhs);
    std::vector<std::vector<double>> out(N + 1, std::vector<double>(n));
    for (int k = 0; k <= N; ++k)
        for (int i = 0; i < n; ++i) out[k][i] = f[k * n + i];
    return out;
}

}  // namespace oracle
