#include "vpc/forward_solver.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <limits>

namespace vpc {

TimeGrid time_grid(const RunConfig& cfg) { return TimeGrid(cfg.T, cfg.steps()); }
SpatialGrid spatial_grid(const RunConfig& cfg) { return SpatialGrid(cfg.L, cfg.n); }
ControlField zero_control(const RunConfig& cfg) { return ControlField(time_grid(cfg), spatial_grid(cfg)); }
InitialDatum initial_datum(const RunConfig& cfg) { return InitialDatum{cfg.datum_c, cfg.datum_r}; }
ParticleEnsemble initial_ensemble(const RunConfig& cfg) {
    return sample_initial_ensemble(initial_datum(cfg), cfg.n_particles, cfg.seed, cfg.jitter);
}

ParticleEnsemble ForwardTrajectory::snapshot(int k) const {
    ParticleEnsemble e;
    e.f = f;
    e.w = w;
    e.z.assign(z.begin() + static_cast<long>(k) * f.size(), z.begin() + static_cast<long>(k + 1) * f.size());
    return e;
}

std::vector<Vec3> ForwardTrajectory::positions(int k) const {
    std::vector<Vec3> x(f.size());
    for (size_t i = 0; i < f.size(); ++i) x[i] = pos(at(k, i));
    return x;
}

std::vector<double> lp_norms(const ParticleEnsemble& e, const std::vector<double>& ps) {
    std::vector<double> out;
    for (double p : ps) {
        if (!(p >= 1)) throw Error("invalid argument", "p must be ≥ 1");
        if (std::isinf(p)) {
            double m = 0;
            for (double v : e.f) m = std::max(m, std::abs(v));
            out.push_back(m);
            continue;
        }
        double s = 0;
        for (size_t i = 0; i < e.size(); ++i) s += e.w[i] * std::pow(std::abs(e.f[i]), p);
        out.push_back(std::pow(s, 1.0 / p));
    }
    return out;
}

namespace {

NodeDiagnostics diagnose(const std::vector<Vec6>& z, size_t off, size_t n, const std::vector<double>& f,
                         const std::vector<double>& w, const std::vector<double>& psi_at) {
    NodeDiagnostics d;
    double l1 = 0, l2 = 0, mx = 0, sup = 0, en = 0;
    for (size_t i = 0; i < n; ++i) {
        l1 += w[i] * std::abs(f[i]);
        l2 += w[i] * f[i] * f[i];
        mx = std::max(mx, std::abs(f[i]));
        sup = std::max(sup, norm6(z[off + i]));
        en += 0.5 * w[i] * f[i] * psi_at[i];
    }
    d.l1 = l1;
    d.l2 = std::sqrt(l2);
    d.linf = mx;
    d.support = sup;
    d.field_energy = en;
    return d;
}

}  // namespace

ForwardTrajectory solve_vp(const ParticleEnsemble& initial, const InitialDatum& datum, const ControlField& B,
                           const RunConfig& cfg, const ForwardOptions& opt) {
    if (initial.size() == 0) throw Error("empty ensemble");
    for (double v : initial.f)
        if (v < 0) throw Error("invalid datum", "forward distribution must be nonnegative");
    const TimeGrid tg = time_grid(cfg);
    const SpatialGrid sg = spatial_grid(cfg);
    if (B.time.steps != tg.steps || !(B.grid == sg)) throw Error("grid mismatch", "control field does not match config grids");

    ForwardTrajectory fw;
    fw.time = tg;
    fw.datum = datum;
    fw.f = initial.f;
    fw.w = initial.w;
    fw.B = B;
    fw.A = AccelHistory(tg, sg);
    const size_t n = initial.size();
    fw.z.resize(static_cast<size_t>(tg.nodes()) * n);
    std::copy(initial.z.begin(), initial.z.end(), fw.z.begin());
    if (opt.gradients) {
        fw.grad_f.resize(static_cast<size_t>(tg.nodes()) * n);
        for (size_t i = 0; i < n; ++i) datum.value_grad(initial.z[i], fw.grad_f[i]);
    }

    GridInteraction pic(sg, MollifiedKernel(cfg.eps_kernel), opt.exec);
    std::vector<double> q(n);
    for (size_t i = 0; i < n; ++i) q[i] = initial.w[i] * initial.f[i];
    std::vector<Vec3> x(n);
    std::vector<double> rho, E3, psi_at(n);
    std::vector<std::vector<double>> pot;
    const FlowField F = fw.flow_field();

    auto field_at = [&](int k) {
        for (size_t i = 0; i < n; ++i) x[i] = pos(fw.at(k, i));
        pic.deposit(x, q.data(), 1, rho);
        pic.grad_psi_grid(rho, E3);
        pic.convolver().convolve(rho.data(), {KernelPart::value}, pot);
        pic.interpolate(x, pot[0], 1, psi_at.data());
    };

    const double r_init = initial.max_radius();
    double a2 = 0;  // running ||A||^2 in L2(0,t;Linf)
    for (int k = 0; k < tg.steps; ++k) {
        field_at(k);
        fw.diag.push_back(diagnose(fw.z, static_cast<size_t>(k) * n, n, fw.f, fw.w, psi_at));
        double* A = fw.A.slice(k);
        double amax = 0;
        for (size_t m = 0; m < E3.size(); m += 3) {
            for (int c = 0; c < 3; ++c) A[m + c] = -E3[m + c];
            amax = std::max(amax, A[m] * A[m] + A[m + 1] * A[m + 1] + A[m + 2] * A[m + 2]);
        }
        a2 += (tg.t(k + 1) - tg.t(k)) * amax;

        const Vec6* zk = &fw.z[static_cast<size_t>(k) * n];
        Vec6* zn = &fw.z[static_cast<size_t>(k + 1) * n];
        const int ni = static_cast<int>(n);
        bool bad = false;
        auto push = [&](int i) {
            try {
                if (!opt.gradients) {
                    zn[i] = node_step(F, k, true, zk[i]);
                    return;
                }
                Mat6 J;
                zn[i] = node_step(F, k, true, zk[i], &J);
                // d_z f at the new point: J^{-T} times the old covector
                Eigen::Map<const Eigen::Matrix<double, 6, 6, Eigen::RowMajor>> Jm(J.data());
                Eigen::Map<const Eigen::Matrix<double, 6, 1>> g0(fw.grad_f[static_cast<size_t>(k) * n + i].data());
                Eigen::Matrix<double, 6, 1> g1 = Jm.transpose().partialPivLu().solve(g0);
                for (int a = 0; a < 6; ++a) fw.grad_f[static_cast<size_t>(k + 1) * n + i][a] = g1[a];
            } catch (const Error&) {
                bad = true;
            }
        };
        if (opt.exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
            for (int i = 0; i < ni; ++i) push(i);
        } else {
            for (int i = 0; i < ni; ++i) push(i);
        }
        if (bad) throw Error("blow-up", "non-finite marker state at step " + std::to_string(k));
        // characteristics cannot leave the certified ball; if they do the integrator is unstable
        const double cap = zeta(r_init, tg.t(k + 1), std::sqrt(a2)) * (1.0 + 1e-9);
        for (size_t i = 0; i < n; ++i)
            if (norm6(zn[i]) > cap)
                throw Error("blow-up", "marker " + std::to_string(i) + " left the certified ball at step " +
                                           std::to_string(k + 1));
    }
    field_at(tg.steps);
    fw.diag.push_back(diagnose(fw.z, static_cast<size_t>(tg.steps) * n, n, fw.f, fw.w, psi_at));
    fw.a_norm = fw.A.l2_linf();
    return fw;
}

ForwardTrajectory solve_vp(const InitialDatum& datum, const ControlField& B, const RunConfig& cfg,
                           const ForwardOptions& opt) {
    return solve_vp(sample_initial_ensemble(datum, cfg.n_particles, cfg.seed, cfg.jitter), datum, B, cfg, opt);
}

std::vector<double> evaluate_state(const ForwardTrajectory& fwd, int k, const std::vector<Vec6>& ys,
                                   std::vector<Vec6>* grads, Exec ex) {
    const FlowField F = fwd.flow_field();
    std::vector<double> out(ys.size());
    if (grads) grads->resize(ys.size());
    const int n = static_cast<int>(ys.size());
    bool bad = false;
    auto one = [&](int i) {
        try {
            Vec6 z = ys[i];
            if (!grads) {
                for (int j = k - 1; j >= 0; --j) z = node_step(F, j, false, z);
                out[i] = fwd.datum.value(z);
                return;
            }
            // covector pulled back through the product of step Jacobians
            Mat6 J = identity6();
            for (int j = k - 1; j >= 0; --j) {
                Mat6 S;
                z = node_step(F, j, false, z, &S);
                J = matmul6(S, J);
            }
            Vec6 g0;
            out[i] = fwd.datum.value_grad(z, g0);
            (*grads)[i] = matTvec6(J, g0);
        } catch (const Error&) {
            bad = true;
        }
    };
    if (ex == Exec::parallel) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i) one(i);
    } else {
        for (int i = 0; i < n; ++i) one(i);
    }
    if (bad) throw Error("blow-up", "non-finite backward characteristic");
    return out;
}

}  // namespace vpc
