#include "vpc/tangent_adjoint.hpp"

#include <algorithm>
#include <sstream>

namespace vpc {

std::vector<double> ZeroTarget::values(const std::vector<Vec6>& z, std::vector<Vec6>* grads) const {
    if (grads) grads->assign(z.size(), Vec6{});
    return std::vector<double>(z.size(), 0.0);
}

std::vector<double> DatumTarget::values(const std::vector<Vec6>& z, std::vector<Vec6>* grads) const {
    std::vector<double> out(z.size());
    if (grads) grads->resize(z.size());
    for (size_t i = 0; i < z.size(); ++i) {
        Vec6 y;
        for (int a = 0; a < 6; ++a) y[a] = z[i][a] - shift_[a];
        Vec6 g;
        out[i] = datum_.value_grad(y, g);
        if (grads) (*grads)[i] = g;
    }
    return out;
}

std::vector<double> TwinTarget::values(const std::vector<Vec6>& z, std::vector<Vec6>* grads) const {
    return evaluate_state(*ref_, ref_->time.steps, z, grads);
}

std::vector<double> terminal_mismatch(const ForwardTrajectory& fwd, const Target& fd, std::vector<Vec6>* grads) {
    const int N = fwd.time.steps;
    const size_t n = fwd.markers();
    std::vector<Vec6> zT(fwd.z.begin() + static_cast<long>(N) * n, fwd.z.begin() + static_cast<long>(N + 1) * n);
    std::vector<Vec6> gd;
    std::vector<double> d = fd.values(zT, grads ? &gd : nullptr);
    for (size_t i = 0; i < n; ++i) d[i] = fwd.f[i] - d[i];
    if (grads) {
        if (!fwd.has_gradients()) throw Error("missing gradients", "forward solve ran without gradients");
        grads->resize(n);
        for (size_t i = 0; i < n; ++i)
            for (int a = 0; a < 6; ++a) (*grads)[i][a] = fwd.grad_at(N, i)[a] - gd[i][a];
    }
    return d;
}

namespace {

Vec3 dv(const Vec6& g) { return {g[3], g[4], g[5]}; }

void require_gradients(const ForwardTrajectory& fwd) {
    if (!fwd.has_gradients()) throw Error("missing gradients", "forward solve ran without gradients");
}

double support_radius(const ForwardTrajectory& fwd) {
    double r = fwd.datum.r;
    for (const auto& d : fwd.diag) r = std::max(r, d.support);
    return r;
}

}  // namespace

LinearSolution tangent(const ForwardTrajectory& fwd, const ControlField& H, Interaction& inter,
                       const PicardOptions& opt) {
    require_gradients(fwd);
    if (!H.compatible(fwd.B)) throw Error("grid mismatch", "direction field does not match the control grids");
    const Carrier c = Carrier::from_forward(fwd);
    LinearVlasovProblem p;
    p.orientation = Orientation::initial;
    p.datum.assign(c.n, 0.0);
    p.C = [&fwd](int k, size_t i, const Vec6&) { return dv(fwd.grad_at(k, i)); };
    p.b = [&fwd, &H](int k, size_t i, const Vec6& z) {
        const Vec3 h = H.eval_node_time(k, pos(z));
        return -dot(cross(vel(z), h), dv(fwd.grad_at(k, i)));
    };
    p.r0 = support_radius(fwd);
    return solve_linear(p, c, inter, opt);
}

CostateSolution costate(const ForwardTrajectory& fwd, const Target& fd, Interaction& inter, const PicardOptions& opt,
                        bool gradients) {
    require_gradients(fwd);
    const Carrier c = Carrier::from_forward(fwd);
    const TimeGrid& tg = fwd.time;
    const int N = tg.steps;
    const size_t n = c.n;

    CostateSolution out;
    out.chi = build_cutoff(support_radius(fwd), tg.T, fwd.a_norm);
    const Cutoff chi = out.chi;

    std::vector<Vec6> gT;
    LinearVlasovProblem p;
    p.orientation = Orientation::final_value;
    p.datum = terminal_mismatch(fwd, fd, gradients ? &gT : nullptr);
    p.dva = [&fwd](int k, size_t i, const Vec6&) { return dv(fwd.grad_at(k, i)); };
    p.chi = [chi](const Vec6& z) { return chi.value(z); };
    p.r0 = support_radius(fwd);
    out.sol = solve_linear(p, c, inter, opt);
    if (!gradients) return out;

    // z-gradient of g by the backward covector recursion of the trapezoid rule
    std::vector<Vec6> gradS(n), gradS_next(n);
    std::vector<Vec3> Q(n), dphi;
    std::vector<double> phi_v;
    auto source_grad = [&](int k, std::vector<Vec6>& gs) {
        const std::vector<Vec3> x = c.positions(k);
        for (size_t i = 0; i < n; ++i) Q[i] = (c.w[i] * out.sol.value(k, i)) * dv(fwd.grad_at(k, i));
        inter.phi(x, Q, phi_v);
        inter.grad_phi(x, Q, dphi);
        for (size_t i = 0; i < n; ++i) {
            const Vec6& z = c.at(k, i);
            const double cv = chi.value(z);
            const Vec6 cg = chi.grad(z);
            for (int a = 0; a < 6; ++a) gs[i][a] = phi_v[i] * cg[a] + (a < 3 ? cv * dphi[i][a] : 0.0);
        }
    };
    out.grad.resize(static_cast<size_t>(tg.nodes()) * n);
    for (size_t i = 0; i < n; ++i) out.grad[static_cast<size_t>(N) * n + i] = gT[i];
    source_grad(N, gradS_next);
    const FlowField F = fwd.flow_field();
    for (int k = N - 1; k >= 0; --k) {
        source_grad(k, gradS);
        const double h = tg.t(k + 1) - tg.t(k);
        const int ni = static_cast<int>(n);
#pragma omp parallel for schedule(static)
        for (int i = 0; i < ni; ++i) {
            Mat6 J;
            node_step(F, k, true, c.at(k, i), &J);
            Vec6 up;
            const Vec6& gn = out.grad[static_cast<size_t>(k + 1) * n + i];
            for (int a = 0; a < 6; ++a) up[a] = gn[a] - 0.5 * h * gradS_next[i][a];
            const Vec6 pulled = matTvec6(J, up);
            Vec6& gk = out.grad[static_cast<size_t>(k) * n + i];
            for (int a = 0; a < 6; ++a) gk[a] = pulled[a] - 0.5 * h * gradS[i][a];
        }
        gradS_next.swap(gradS);
    }
    return out;
}

LinearSolution costate_derivative(const ForwardTrajectory& fwd, const ControlField& H, const LinearSolution& tang,
                                  const CostateSolution& g, Interaction& inter, const PicardOptions& opt) {
    require_gradients(fwd);
    if (g.grad.empty()) throw Error("missing gradients", "costate solved without gradients");
    const Carrier c = Carrier::from_forward(fwd);
    const TimeGrid& tg = fwd.time;
    const size_t n = c.n;
    const Cutoff chi = g.chi;

    // fixed source: -chi Phi_{g, f'} + d_x psi_{f'} . d_v g - (v x H) . d_v g
    auto src = std::make_shared<std::vector<double>>(static_cast<size_t>(tg.nodes()) * n);
    std::vector<double> q(n), phi_v;
    std::vector<Vec3> Q(n), gp;
    for (int k = 0; k < tg.nodes(); ++k) {
        const std::vector<Vec3> x = c.positions(k);
        for (size_t i = 0; i < n; ++i) {
            const double fp = tang.value(k, i);
            q[i] = c.w[i] * fp;
            Q[i] = q[i] * dv(g.grad_at(k, i));
        }
        inter.phi(x, Q, phi_v);
        inter.grad_psi(x, q, gp);
        for (size_t i = 0; i < n; ++i) {
            const Vec6& z = c.at(k, i);
            const Vec3 dg = dv(g.grad_at(k, i));
            const Vec3 h = H.eval_node_time(k, pos(z));
            (*src)[static_cast<size_t>(k) * n + i] =
                -chi.value(z) * phi_v[i] + dot(gp[i], dg) - dot(cross(vel(z), h), dg);
        }
    }

    LinearVlasovProblem p;
    p.orientation = Orientation::final_value;
    p.datum.resize(n);
    for (size_t i = 0; i < n; ++i) p.datum[i] = tang.value(tg.steps, i);
    p.dva = [&fwd](int k, size_t i, const Vec6&) { return dv(fwd.grad_at(k, i)); };
    p.chi = [chi](const Vec6& z) { return chi.value(z); };
    p.b = [src, n](int k, size_t i, const Vec6&) { return (*src)[static_cast<size_t>(k) * n + i]; };
    p.r0 = support_radius(fwd);
    return solve_linear(p, c, inter, opt);
}

PhaseLattice::PhaseLattice(double r_, int n_) : r(r_), n(n_) {
    if (n < 2 || !(r > 0)) throw Error("invalid argument", "lattice needs r > 0 and n >= 2");
    spacing = 2.0 * r / (n - 1);
    size_t s = 1;
    for (int a = 0; a < 6; ++a) s *= static_cast<size_t>(n);
    values.assign(s, 0.0);
}

size_t PhaseLattice::index(const int j[6]) const {
    size_t m = 0;
    for (int a = 0; a < 6; ++a) m = m * n + j[a];
    return m;
}

Vec6 PhaseLattice::node(size_t m) const {
    Vec6 z;
    for (int a = 5; a >= 0; --a) {
        z[a] = -r + spacing * static_cast<double>(m % n);
        m /= n;
    }
    return z;
}

namespace {

// base index and fractional offset per axis; false outside the lattice
bool cell_of(const PhaseLattice& L, const Vec6& z, int base[6], double frac[6]) {
    for (int a = 0; a < 6; ++a) {
        const double u = (z[a] + L.r) / L.spacing;
        if (u < 0 || u > L.n - 1) return false;
        int b = std::min(static_cast<int>(u), L.n - 2);
        base[a] = b;
        frac[a] = u - b;
    }
    return true;
}

template <class Fn>
void for_corners(const int base[6], const double frac[6], Fn&& fn) {
    for (int c = 0; c < 64; ++c) {
        int j[6];
        double w = 1;
        for (int a = 0; a < 6; ++a) {
            const int bit = (c >> a) & 1;
            j[a] = base[a] + bit;
            w *= bit ? frac[a] : 1.0 - frac[a];
        }
        if (w != 0.0) fn(j, w);
    }
}

}  // namespace

double PhaseLattice::eval(const Vec6& z) const {
    int base[6];
    double frac[6];
    if (!cell_of(*this, z, base, frac)) return 0.0;
    double s = 0;
    for_corners(base, frac, [&](const int* j, double w) { s += w * values[index(j)]; });
    return s;
}

Vec6 PhaseLattice::grad_node(size_t m) const {
    int j[6];
    size_t t = m;
    for (int a = 5; a >= 0; --a) {
        j[a] = static_cast<int>(t % n);
        t /= n;
    }
    Vec6 g;
    for (int a = 0; a < 6; ++a) {
        int lo[6], hi[6];
        std::copy(j, j + 6, lo);
        std::copy(j, j + 6, hi);
        lo[a] = std::max(0, j[a] - 1);
        hi[a] = std::min(n - 1, j[a] + 1);
        g[a] = (values[index(hi)] - values[index(lo)]) / ((hi[a] - lo[a]) * spacing);
    }
    return g;
}

Vec6 PhaseLattice::grad(const Vec6& z) const {
    Vec6 g{};
    int base[6];
    double frac[6];
    if (!cell_of(*this, z, base, frac)) return g;
    for_corners(base, frac, [&](const int* j, double w) {
        const Vec6 gn = grad_node(index(j));
        for (int a = 0; a < 6; ++a) g[a] += w * gn[a];
    });
    return g;
}

PhaseLattice lattice_deposit(const ParticleEnsemble& e, double r, int n) {
    PhaseLattice L(r, n);
    const double inv = 1.0 / std::pow(L.spacing, 6);
    std::vector<size_t> escaped;
    for (size_t i = 0; i < e.size(); ++i) {
        int base[6];
        double frac[6];
        if (!cell_of(L, e.z[i], base, frac)) {
            if (e.f[i] != 0.0) escaped.push_back(i);
            continue;
        }
        const double q = e.w[i] * e.f[i] * inv;
        for_corners(base, frac, [&](const int* j, double w) { L.values[L.index(j)] += w * q; });
    }
    if (!escaped.empty()) {
        std::ostringstream os;
        os << escaped.size() << " markers outside the lattice:";
        for (size_t k = 0; k < std::min<size_t>(escaped.size(), 20); ++k) os << ' ' << escaped[k];
        throw Error("support escape", os.str());
    }
    return L;
}

}  // namespace vpc
