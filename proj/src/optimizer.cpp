#include "vpc/optimizer.hpp"

#include <algorithm>
#include <numbers>
#include <random>

namespace vpc {

OptimizerOptions optimizer_options(const RunConfig& cfg) {
    OptimizerOptions o;
    o.max_iter = cfg.opt_max_iter;
    o.step0 = cfg.opt_step0;
    o.armijo = cfg.opt_armijo;
    o.backtrack = cfg.opt_backtrack;
    o.max_backtracks = cfg.opt_max_backtracks;
    o.tol = cfg.opt_tol;
    return o;
}

bool OptimizationTrace::monotone() const {
    for (size_t i = 1; i < iters.size(); ++i)
        if (!(iters[i].J < iters[i - 1].J)) return false;
    return true;
}

ControlField project_ball(const ControlField& B, double K) {
    if (!(K > 0)) throw Error("invalid argument", "K must be > 0");
    const double nv = v_norm(B);
    if (nv <= K) return B;
    ControlField out = B;
    out *= K / nv;
    return out;
}

namespace {

IterationRecord record(int it, const CostReport& r, const ControlField& B, double step, bool projected, int bt) {
    IterationRecord rec;
    rec.iter = it;
    rec.J = r.J;
    rec.tracking = r.tracking;
    rec.regularization = r.regularization;
    rec.grad_dual = r.gradient_dual;
    rec.step = step;
    rec.norm = v_norm(B);
    rec.projected = projected;
    rec.backtracks = bt;
    return rec;
}

}  // namespace

OptimizationTrace minimize(ControlProblem& P, const ControlField& B0, const OptimizerOptions& opt) {
    const RunConfig& cfg = P.config();
    OptimizationTrace tr;
    ControlField B = project_ball(B0, cfg.K);
    ForwardTrajectory fwd;
    CostReport r = P.evaluate(B, true, &fwd);
    tr.iters.push_back(record(0, r, B, 0.0, false, 0));
    const double dual0 = r.gradient_dual;
    tr.status = "max_iter";
    if (dual0 <= opt.abs_tol) {
        tr.status = "stationary";
        tr.B = B;
        tr.final = r;
        return tr;
    }
    double alpha = opt.step0 * 0.1 * cfg.K / dual0;
    for (int it = 1; it <= opt.max_iter; ++it) {
        const ControlField R = v_riesz(r.gradient);
        bool accepted = false;
        int bt = 0;
        ControlField Bt;
        ForwardTrajectory ft;
        CostReport rt;
        bool projected = false;
        for (; bt <= opt.max_backtracks; ++bt) {
            ControlField trial = B;
            trial.axpy(-alpha, R);
            projected = v_norm(trial) > cfg.K;
            Bt = project_ball(trial, cfg.K);
            ft = P.forward(Bt, true);
            rt = cost(ft, P.target(), cfg.lambda);
            const double decrease = l2_inner(r.gradient, Bt - B);
            if (rt.J < r.J && rt.J <= r.J + opt.armijo * decrease) {
                accepted = true;
                break;
            }
            alpha *= opt.backtrack;
        }
        if (!accepted) {
            tr.status = "stalled";
            break;
        }
        const CostateSolution g = P.costate(ft, false);
        rt.gradient = gradient(ft, g, cfg.lambda);
        rt.gradient_dual = dual_norm(rt.gradient);
        rt.has_gradient = true;

        const ControlField s = Bt - B;
        const double step = v_norm(s);
        if (opt.spectral) {
            const double sy = l2_inner(s, rt.gradient - r.gradient);
            const double ss = step * step;
            alpha = sy > 0 ? ss / sy : alpha * 4.0;
        }
        B = std::move(Bt);
        r = std::move(rt);
        fwd = std::move(ft);
        tr.iters.push_back(record(it, r, B, step, projected, bt));
        if (r.gradient_dual <= opt.tol * dual0) {
            tr.status = "converged";
            break;
        }
    }
    tr.B = std::move(B);
    tr.final = std::move(r);
    return tr;
}

ControlField band_limited_field(const TimeGrid& tg, const SpatialGrid& sg, std::uint64_t seed, int max_mode) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N01(0.0, 1.0);
    struct Mode {
        int q[3];
        Vec3 a0, a1;
    };
    std::vector<Mode> modes;
    for (int a = 0; a <= max_mode; ++a)
        for (int b = 0; b <= max_mode; ++b)
            for (int c = 0; c <= max_mode; ++c) {
                if (a + b + c == 0) continue;
                Mode m{{a, b, c}, {}, {}};
                const double amp = 1.0 / (a * a + b * b + c * c);
                for (int d = 0; d < 3; ++d) {
                    m.a0[d] = amp * N01(rng);
                    m.a1[d] = amp * N01(rng);
                }
                modes.push_back(m);
            }
    ControlField B(tg, sg);
    const double w = std::numbers::pi / (2.0 * sg.L);
    for (int m = 0; m < sg.size(); ++m) {
        const Vec3 x = sg.node(m);
        Vec3 v0{0, 0, 0}, v1{0, 0, 0};
        for (const Mode& md : modes) {
            double basis = 1;
            for (int d = 0; d < 3; ++d) basis *= std::cos(md.q[d] * w * (x[d] + sg.L));
            v0 = v0 + basis * md.a0;
            v1 = v1 + basis * md.a1;
        }
        for (int k = 0; k < tg.nodes(); ++k) {
            const double s = tg.t(k) / tg.T;
            double* p = B.at(k, m);
            for (int d = 0; d < 3; ++d) p[d] = (1 - s) * v0[d] + s * v1[d];
        }
    }
    return B;
}

VariationalReport variational_inequality_check(const ControlField& Bbar, const ControlField& G,
                                               const std::vector<ControlField>& panel) {
    VariationalReport rep;
    rep.min_pairing = panel.empty() ? 0.0 : 1e300;
    for (const ControlField& B : panel) {
        const double v = l2_inner(G, B - Bbar);
        rep.pairings.push_back(v);
        rep.min_pairing = std::min(rep.min_pairing, v);
    }
    rep.max_unit_pairing = dual_norm(G);
    return rep;
}

ControlField representation_field(ControlProblem& P, const ForwardTrajectory& fwd, const CostateSolution& g,
                                  bool ibp) {
    const double lambda = P.config().lambda;
    if (!(lambda > 0)) throw Error("representation undefined", "lambda must be > 0");
    if (ibp && g.grad.empty()) throw Error("missing gradients", "costate solved without gradients");
    if (!fwd.has_gradients()) throw Error("missing gradients", "forward solve ran without gradients");
    GridInteraction& gi = P.grid_interaction();
    ControlField out(fwd.B.time, fwd.B.grid);
    const size_t n = fwd.markers();
    const int N = out.grid.size();
    std::vector<double> charges(3 * n), rho, comp(N);
    std::vector<std::vector<double>> conv;
    const double scale = (ibp ? 1.0 : -1.0) / (4.0 * std::numbers::pi * lambda);
    for (int k = 0; k < out.time.nodes(); ++k) {
        const std::vector<Vec3> x = fwd.positions(k);
        for (size_t i = 0; i < n; ++i) {
            const Vec6& z = fwd.at(k, i);
            Vec3 c;
            if (ibp) {
                const Vec6& dg = g.grad_at(k, i);
                c = (fwd.w[i] * fwd.f[i]) * cross(vel(z), Vec3{dg[3], dg[4], dg[5]});
            } else {
                const Vec6& df = fwd.grad_at(k, i);
                c = (fwd.w[i] * g.value(k, i)) * cross(vel(z), Vec3{df[3], df[4], df[5]});
            }
            for (int d = 0; d < 3; ++d) charges[i * 3 + d] = c[d];
        }
        gi.deposit(x, charges.data(), 3, rho);
        double* dst = out.at(k, 0);
        for (int d = 0; d < 3; ++d) {
            for (int m = 0; m < N; ++m) comp[m] = rho[m * 3 + d];
            gi.convolver().convolve(comp.data(), {KernelPart::value}, conv);
            for (int m = 0; m < N; ++m) dst[m * 3 + d] = scale * conv[0][m];
        }
    }
    return out;
}

OptimalityResidual optimality_residual(ControlProblem& P, const ControlField& Bbar, const ForwardTrajectory& fwd,
                                       const CostateSolution& g) {
    const double lambda = P.config().lambda;
    if (!(lambda > 0)) throw Error("representation undefined", "lambda must be > 0");
    OptimalityResidual res;
    const double nb = std::sqrt(l2_inner(Bbar, Bbar));
    auto rel = [&](const ControlField& rep) {
        const ControlField d = Bbar - rep;
        const double nd = std::sqrt(l2_inner(d, d));
        return nb > 0 ? nd / nb : nd;
    };
    res.convolution = rel(representation_field(P, fwd, g, false));
    res.convolution_ibp = rel(representation_field(P, fwd, g, true));
    const ControlField p = coupling_field(fwd, g);
    ControlField G = p;
    G.axpy(lambda, reg_laplacian(Bbar));
    const double np = std::sqrt(l2_inner(p, p));
    res.laplacian = np > 0 ? std::sqrt(l2_inner(G, G)) / np : std::sqrt(l2_inner(G, G));
    return res;
}

SufficientReport sufficient_condition_probe(ControlProblem& P, const ControlField& Bbar, double alpha, int n_samples,
                                            std::uint64_t seed, const std::vector<double>& ray) {
    const double gamma = P.config().gamma;
    if (!(alpha > 0 && alpha < 2 + gamma)) throw Error("invalid argument", "alpha must lie in (0, 2 + gamma)");
    SufficientReport rep;
    rep.alpha = alpha;
    ForwardTrajectory fwd = P.forward(Bbar, true);
    const CostateSolution g = P.costate(fwd, true);
    const double J0 = cost(fwd, P.target(), P.config().lambda).J;
    rep.min_second = 1e300;
    ControlField worst;
    for (int s = 0; s < n_samples; ++s) {
        ControlField H = band_limited_field(Bbar.time, Bbar.grid, seed + s);
        H *= 1.0 / v_norm(H);
        const double q = P.second(fwd, g, H, H);
        rep.samples.push_back(q);
        if (q <= 0) ++rep.degenerate;
        if (q < rep.min_second) {
            rep.min_second = q;
            worst = H;
        }
    }
    rep.eps_hat = std::max(0.0, rep.min_second);
    if (rep.eps_hat <= 0) {
        rep.conclusion = "condition not verified: nonpositive curvature sample";
        return rep;
    }
    rep.growth_verified = true;
    for (double s : ray) {
        rep.delta = std::max(rep.delta, s);
        for (double sign : {1.0, -1.0}) {
            ControlField B = Bbar;
            B.axpy(sign * s, worst);
            const double dJ = P.J(B) - J0;
            if (dJ < 0.25 * rep.eps_hat * std::pow(s, alpha)) rep.growth_verified = false;
        }
    }
    rep.conclusion = rep.growth_verified ? "growth verified on the ray panel" : "condition not verified: growth fails";
    return rep;
}

UniquenessReport uniqueness_experiment(ControlProblem& P, int n_starts, const OptimizerOptions& opt,
                                       std::uint64_t seed, double start_radius_fraction) {
    if (n_starts < 2) throw Error("invalid argument", "need at least two starts");
    const RunConfig& cfg = P.config();
    UniquenessReport rep;
    rep.T_over_lambda = cfg.lambda > 0 ? cfg.T / cfg.lambda : 1e300;
    rep.below_threshold = rep.T_over_lambda <= cfg.unique_threshold;
    const TimeGrid tg = time_grid(cfg);
    const SpatialGrid sg = spatial_grid(cfg);
    for (int s = 0; s < n_starts; ++s) {
        ControlField B0 = band_limited_field(tg, sg, seed + s);
        B0 *= start_radius_fraction * cfg.K / v_norm(B0);
        rep.runs.push_back(minimize(P, B0, opt));
        if (rep.runs.back().status == "stalled") rep.any_stalled = true;
    }
    std::vector<ForwardTrajectory> fw;
    for (const auto& r : rep.runs) fw.push_back(P.forward(r.B, false));
    const int N = tg.steps;
    const size_t n = fw[0].markers();
    std::vector<Vec6> zT(fw[0].z.begin() + static_cast<long>(N) * n, fw[0].z.end());
    std::vector<std::vector<double>> states;
    for (const auto& f : fw) states.push_back(evaluate_state(f, N, zT));
    for (int a = 0; a < n_starts; ++a)
        for (int b = a + 1; b < n_starts; ++b) {
            rep.max_control_distance = std::max(rep.max_control_distance, v_norm(rep.runs[a].B - rep.runs[b].B));
            double s2 = 0;
            for (size_t i = 0; i < n; ++i) {
                const double d = states[a][i] - states[b][i];
                s2 += fw[0].w[i] * d * d;
            }
            rep.max_state_distance = std::max(rep.max_state_distance, std::sqrt(s2));
        }
    return rep;
}

}  // namespace vpc
