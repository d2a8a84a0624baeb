#include "vpc/cost_gradient.hpp"

namespace vpc {

namespace {
Vec3 dv(const Vec6& g) { return {g[3], g[4], g[5]}; }
}  // namespace

double tracking_term(const ForwardTrajectory& fwd, const Target& fd) {
    const std::vector<double> d = terminal_mismatch(fwd, fd);
    double s = 0;
    for (size_t i = 0; i < d.size(); ++i) s += fwd.w[i] * d[i] * d[i];
    return 0.5 * s;
}

double regularization_term(const ControlField& B, double lambda) { return 0.5 * lambda * reg_inner(B, B); }

CostReport cost(const ForwardTrajectory& fwd, const Target& fd, double lambda) {
    CostReport r;
    r.tracking = tracking_term(fwd, fd);
    r.regularization = regularization_term(fwd.B, lambda);
    r.J = r.tracking + r.regularization;
    return r;
}

ControlField coupling_field(const ForwardTrajectory& fwd, const CostateSolution& g) {
    if (!fwd.has_gradients()) throw Error("missing gradients", "forward solve ran without gradients");
    ControlField p(fwd.B.time, fwd.B.grid);
    const SpatialGrid& sg = p.grid;
    const double inv = 1.0 / sg.cell_volume();
    const size_t n = fwd.markers();
    for (int k = 0; k < p.time.nodes(); ++k) {
        double* out = p.at(k, 0);
        for (size_t i = 0; i < n; ++i) {
            const Vec6& z = fwd.at(k, i);
            int idx[8];
            double w[8];
            if (!sg.stencil(pos(z), idx, w)) continue;
            const double s = fwd.w[i] * g.value(k, i) * inv;
            if (s == 0.0) continue;
            const Vec3 c = cross(vel(z), dv(fwd.grad_at(k, i)));
            for (int a = 0; a < 8; ++a)
                for (int d = 0; d < 3; ++d) out[idx[a] * 3 + d] += w[a] * s * c[d];
        }
    }
    return p;
}

ControlField gradient(const ForwardTrajectory& fwd, const CostateSolution& g, double lambda) {
    ControlField G = coupling_field(fwd, g);
    if (lambda != 0.0) G.axpy(lambda, reg_laplacian(fwd.B));
    return G;
}

double directional_derivative_tangent(const ForwardTrajectory& fwd, const Target& fd, const ControlField& H,
                                      const LinearSolution& tang, double lambda) {
    const std::vector<double> d = terminal_mismatch(fwd, fd);
    const int N = fwd.time.steps;
    double s = 0;
    for (size_t i = 0; i < d.size(); ++i) s += fwd.w[i] * d[i] * tang.value(N, i);
    return s + lambda * reg_inner(fwd.B, H);
}

double lagrangian(const ForwardTrajectory& fwd, const std::vector<double>& f, const std::vector<double>& g,
                  const Target& fd, double lambda) {
    const size_t n = fwd.markers();
    const int N = fwd.time.steps;
    const size_t total = static_cast<size_t>(fwd.time.nodes()) * n;
    if (f.size() != total || g.size() != total) throw Error("invalid argument", "trajectory sizes do not match");
    std::vector<Vec6> zT(fwd.z.begin() + static_cast<long>(N) * n, fwd.z.end());
    const std::vector<double> target = fd.values(zT);
    double track = 0;
    for (size_t i = 0; i < n; ++i) {
        const double d = f[static_cast<size_t>(N) * n + i] - target[i];
        track += fwd.w[i] * d * d;
    }
    // residual on each interval: time difference along the path, paired with the midpoint of g
    double pair = 0;
    for (int k = 0; k < N; ++k)
        for (size_t i = 0; i < n; ++i) {
            const size_t a = static_cast<size_t>(k) * n + i, b = a + n;
            pair += fwd.w[i] * (f[b] - f[a]) * 0.5 * (g[a] + g[b]);
        }
    return 0.5 * track + regularization_term(fwd.B, lambda) - pair;
}

double second_derivative(const ForwardTrajectory& fwd, const ControlField& H1, const ControlField& H2,
                         const LinearSolution& tang2, const LinearSolution& gprime2, const CostateSolution& g,
                         double lambda) {
    if (!fwd.has_gradients() || g.grad.empty()) throw Error("missing gradients", "second derivative needs gradients");
    const size_t n = fwd.markers();
    double s = 0;
    for (int k = 0; k < fwd.time.nodes(); ++k) {
        double sk = 0;
        for (size_t i = 0; i < n; ++i) {
            const Vec6& z = fwd.at(k, i);
            const Vec3 vh = cross(vel(z), H1.eval_node_time(k, pos(z)));
            const Vec3 df = dv(fwd.grad_at(k, i));
            const Vec3 dg = dv(g.grad_at(k, i));
            sk += fwd.w[i] * (dot(vh, df) * gprime2.value(k, i) - dot(vh, dg) * tang2.value(k, i));
        }
        s += fwd.time.weight(k) * sk;
    }
    return lambda * reg_inner(H1, H2) - s;
}

ControlProblem::ControlProblem(const RunConfig& cfg, std::shared_ptr<const Target> fd, Exec ex)
    : cfg_(cfg), fd_(std::move(fd)), datum_(initial_datum(cfg)), ens_(initial_ensemble(cfg)), ex_(ex) {
    cfg_.validate();
    if (!fd_) throw Error("invalid argument", "target missing");
    inter_ = std::make_unique<GridInteraction>(spatial_grid(cfg_), MollifiedKernel(cfg_.eps_kernel), ex);
}

PicardOptions ControlProblem::picard() const {
    PicardOptions o;
    o.tol = cfg_.picard_tol;
    o.max_iter = cfg_.picard_max_iter;
    return o;
}

ForwardTrajectory ControlProblem::forward(const ControlField& B, bool gradients) const {
    ForwardOptions o;
    o.gradients = gradients;
    o.exec = ex_;
    return solve_vp(ens_, datum_, B, cfg_, o);
}

double ControlProblem::J(const ControlField& B) const {
    return cost(forward(B, false), *fd_, cfg_.lambda).J;
}

CostReport ControlProblem::evaluate(const ControlField& B, bool with_gradient, ForwardTrajectory* fwd_out,
                                    CostateSolution* g_out) {
    ForwardTrajectory fwd = forward(B, with_gradient);
    CostReport r = cost(fwd, *fd_, cfg_.lambda);
    if (with_gradient) {
        CostateSolution g = costate(fwd, g_out != nullptr);
        r.gradient = gradient(fwd, g, cfg_.lambda);
        r.gradient_dual = dual_norm(r.gradient);
        r.has_gradient = true;
        if (g_out) *g_out = std::move(g);
    }
    if (fwd_out) *fwd_out = std::move(fwd);
    return r;
}

LinearSolution ControlProblem::tangent(const ForwardTrajectory& fwd, const ControlField& H) {
    return vpc::tangent(fwd, H, *inter_, picard());
}

CostateSolution ControlProblem::costate(const ForwardTrajectory& fwd, bool gradients) {
    return vpc::costate(fwd, *fd_, *inter_, picard(), gradients);
}

double ControlProblem::second(const ForwardTrajectory& fwd, const CostateSolution& g, const ControlField& H1,
                              const ControlField& H2) {
    const LinearSolution t2 = tangent(fwd, H2);
    const LinearSolution gp = costate_derivative(fwd, H2, t2, g, *inter_, picard());
    return second_derivative(fwd, H1, H2, t2, gp, g, cfg_.lambda);
}

}  // namespace vpc
