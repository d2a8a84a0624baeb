#include "vpc/linear_vlasov.hpp"

#include <algorithm>
#include <sstream>

#include "vpc/forward_solver.hpp"

namespace vpc {

std::vector<Vec3> Carrier::positions(int k) const {
    std::vector<Vec3> x(n);
    for (size_t i = 0; i < n; ++i) x[i] = pos(at(k, i));
    return x;
}

Carrier Carrier::from_forward(const ForwardTrajectory& fwd) {
    Carrier c;
    c.time = fwd.time;
    c.n = fwd.markers();
    c.w = fwd.w.data();
    c.z = fwd.z.data();
    return c;
}

Carrier Carrier::transported(const std::vector<Vec6>& nodes, const std::vector<double>& weights, const FlowField& F,
                             bool at_final_time) {
    if (nodes.empty()) throw Error("empty ensemble", "carrier has no nodes");
    Carrier c;
    c.time = F.time;
    c.n = nodes.size();
    c.w_store = std::make_shared<std::vector<double>>(weights);
    c.z_store = std::make_shared<std::vector<Vec6>>(static_cast<size_t>(F.time.nodes()) * c.n);
    auto& Z = *c.z_store;
    const int N = F.time.steps;
    const int ni = static_cast<int>(c.n);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < ni; ++i) {
        if (!at_final_time) {
            Z[i] = nodes[i];
            for (int k = 0; k < N; ++k) Z[(k + 1) * c.n + i] = node_step(F, k, true, Z[k * c.n + i]);
        } else {
            Z[N * c.n + i] = nodes[i];
            for (int k = N - 1; k >= 0; --k) Z[k * c.n + i] = node_step(F, k, false, Z[(k + 1) * c.n + i]);
        }
    }
    c.w = c.w_store->data();
    c.z = c.z_store->data();
    return c;
}

Carrier Carrier::lattice(double r, int n_axis, const FlowField& F, bool at_final_time, bool ball, bool cell_centred) {
    if (n_axis < 2 && !cell_centred) throw Error("invalid argument", "lattice needs at least 2 points per axis");
    const double s = cell_centred ? 2.0 * r / n_axis : 2.0 * r / (n_axis - 1);
    std::vector<Vec6> nodes;
    std::vector<double> w;
    int j[6];
    const double wv = std::pow(s, 6);
    for (j[0] = 0; j[0] < n_axis; ++j[0])
        for (j[1] = 0; j[1] < n_axis; ++j[1])
            for (j[2] = 0; j[2] < n_axis; ++j[2])
                for (j[3] = 0; j[3] < n_axis; ++j[3])
                    for (j[4] = 0; j[4] < n_axis; ++j[4])
                        for (j[5] = 0; j[5] < n_axis; ++j[5]) {
                            Vec6 z;
                            for (int a = 0; a < 6; ++a) z[a] = -r + s * (j[a] + (cell_centred ? 0.5 : 0.0));
                            if (ball && norm6(z) > r * (1 + 1e-12)) continue;
                            nodes.push_back(z);
                            w.push_back(wv);
                        }
    return transported(nodes, w, F, at_final_time);
}

double Cutoff::value(const Vec6& z) const {
    const double r = norm6(z);
    if (r <= r1) return 1.0;
    if (r >= r2) return 0.0;
    const double s = (r - r1) / (r2 - r1);
    if (profile == CutoffProfile::cubic) return 1.0 - s * s * (3.0 - 2.0 * s);
    return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

Vec6 Cutoff::grad(const Vec6& z) const {
    Vec6 g{};
    const double r = norm6(z);
    if (r <= r1 || r >= r2) return g;
    const double s = (r - r1) / (r2 - r1);
    const double ds = profile == CutoffProfile::cubic ? -6.0 * s * (1.0 - s) : -30.0 * s * s * (1.0 - s) * (1.0 - s);
    const double scale = ds / ((r2 - r1) * r);
    for (int a = 0; a < 6; ++a) g[a] = scale * z[a];
    return g;
}

Cutoff build_cutoff(double r0, double T, double a_norm, CutoffProfile p) {
    if (!(r0 > 0)) throw Error("invalid argument", "r0 must be > 0");
    Cutoff c;
    c.r1 = zeta(r0, T, a_norm);
    c.r2 = 2.0 * c.r1;
    c.profile = p;
    return c;
}

LinearSolution solve_linear(const LinearVlasovProblem& p, const Carrier& c, Interaction& inter,
                            const PicardOptions& opt) {
    const TimeGrid& tg = c.time;
    const int N = tg.steps;
    const size_t n = c.n;
    const size_t total = static_cast<size_t>(tg.nodes()) * n;
    if (p.datum.size() != n) throw Error("invalid problem", "datum must have one value per carrier node");

    std::vector<Vec3> Cv, Dv;
    std::vector<double> bv(total, 0.0), chiv;
    if (p.C) Cv.resize(total);
    if (p.dva) {
        Dv.resize(total);
        chiv.assign(total, 1.0);
    }
    const int nodes = tg.nodes();
    for (int k = 0; k < nodes; ++k) {
        const int ni = static_cast<int>(n);
#pragma omp parallel for schedule(static)
        for (int i = 0; i < ni; ++i) {
            const size_t id = static_cast<size_t>(k) * n + i;
            const Vec6& z = c.at(k, i);
            if (p.C) Cv[id] = p.C(k, i, z);
            if (p.dva) {
                Dv[id] = p.dva(k, i, z);
                if (p.chi) chiv[id] = p.chi(z);
            }
            if (p.b) bv[id] = p.b(k, i, z);
        }
    }

    std::vector<double> cur = p.start.empty() ? std::vector<double>(total, 0.0) : p.start;
    if (cur.size() != total) throw Error("invalid problem", "start iterate has wrong size");
    std::vector<double> next(total), S(total);
    std::vector<double> q(n), phi_v;
    std::vector<Vec3> Q(n), gpsi;

    LinearSolution sol;
    sol.time = tg;
    sol.n = n;
    bool converged = false;
    const bool coupled = p.C || p.dva;
    for (int it = 1; it <= opt.max_iter; ++it) {
        for (int k = 0; k < nodes; ++k) {
            double* Sk = &S[static_cast<size_t>(k) * n];
            const double* fk = &cur[static_cast<size_t>(k) * n];
            for (size_t i = 0; i < n; ++i) Sk[i] = bv[static_cast<size_t>(k) * n + i];
            if (!coupled) continue;
            const std::vector<Vec3> x = c.positions(k);
            if (p.C) {
                for (size_t i = 0; i < n; ++i) q[i] = c.w[i] * fk[i];
                inter.grad_psi(x, q, gpsi);
                for (size_t i = 0; i < n; ++i) Sk[i] += dot(gpsi[i], Cv[static_cast<size_t>(k) * n + i]);
            }
            if (p.dva) {
                for (size_t i = 0; i < n; ++i) Q[i] = (c.w[i] * fk[i]) * Dv[static_cast<size_t>(k) * n + i];
                inter.phi(x, Q, phi_v);
                for (size_t i = 0; i < n; ++i) Sk[i] += chiv[static_cast<size_t>(k) * n + i] * phi_v[i];
            }
        }
        // representation formula along each carrier path, trapezoid in time
        if (p.orientation == Orientation::initial) {
            for (size_t i = 0; i < n; ++i) next[i] = p.datum[i];
            for (int k = 1; k <= N; ++k) {
                const double h = tg.t(k) - tg.t(k - 1);
                for (size_t i = 0; i < n; ++i)
                    next[k * n + i] = next[(k - 1) * n + i] + 0.5 * h * (S[(k - 1) * n + i] + S[k * n + i]);
            }
        } else {
            for (size_t i = 0; i < n; ++i) next[N * n + i] = p.datum[i];
            for (int k = N - 1; k >= 0; --k) {
                const double h = tg.t(k + 1) - tg.t(k);
                for (size_t i = 0; i < n; ++i)
                    next[k * n + i] = next[(k + 1) * n + i] - 0.5 * h * (S[k * n + i] + S[(k + 1) * n + i]);
            }
        }
        double change = 0;
        for (size_t i = 0; i < total; ++i) change = std::max(change, std::abs(next[i] - cur[i]));
        sol.picard_log.push_back(change);
        cur.swap(next);
        sol.iterations = it;
        if (change < opt.tol) {
            converged = true;
            break;
        }
    }
    sol.f = std::move(cur);
    if (!converged && opt.throw_on_stall) {
        std::ostringstream os;
        os << "no convergence in " << opt.max_iter << " iterations; log:";
        for (double v : sol.picard_log) os << ' ' << v;
        throw Error("picard non-convergence", os.str());
    }
    return sol;
}

std::vector<double> picard_rate(const std::vector<double>& log) {
    if (log.size() < 3) throw Error("too-short log", "picard_rate needs at least 3 entries");
    std::vector<double> r;
    for (size_t i = 0; i + 1 < log.size(); ++i) r.push_back(log[i] > 0 ? log[i + 1] / log[i] : 0.0);
    return r;
}

}  // namespace vpc
