#pragma once

#include <memory>
#include <vector>

#include "vpc/characteristics.hpp"
#include "vpc/kernel_fields.hpp"

namespace vpc {

struct NodeDiagnostics {
    double l1 = 0, l2 = 0, linf = 0;
    double support = 0;       // max |z_i|
    double field_energy = 0;  // 1/2 sum_i q_i psi(x_i)
};

// Marker paths of the nonlinear solve. Marker values and weights never change along a path.
struct ForwardTrajectory {
    TimeGrid time;
    InitialDatum datum;
    std::vector<double> f, w;
    std::vector<Vec6> z;       // (k * n + i)
    std::vector<Vec6> grad_f;  // d_z f_B(t_k, z_i(t_k)), empty unless requested
    AccelHistory A;            // A = -d_x psi, frozen per interval
    ControlField B;
    std::vector<NodeDiagnostics> diag;
    double a_norm = 0;  // ||A||_{L2(0,T;Linf)}

    size_t markers() const { return f.size(); }
    const Vec6& at(int k, size_t i) const { return z[static_cast<size_t>(k) * f.size() + i]; }
    const Vec6& grad_at(int k, size_t i) const { return grad_f[static_cast<size_t>(k) * f.size() + i]; }
    ParticleEnsemble snapshot(int k) const;
    std::vector<Vec3> positions(int k) const;
    FlowField flow_field() const { return FlowField::from_history(&A, &B); }
    bool has_gradients() const { return !grad_f.empty(); }
};

struct ForwardOptions {
    bool gradients = false;
    Exec exec = Exec::parallel;
};

ForwardTrajectory solve_vp(const ParticleEnsemble& initial, const InitialDatum& datum, const ControlField& B,
                           const RunConfig& cfg, const ForwardOptions& opt = {});
ForwardTrajectory solve_vp(const InitialDatum& datum, const ControlField& B, const RunConfig& cfg,
                           const ForwardOptions& opt = {});

// (sum w f^p)^(1/p); p = infinity gives max f.
std::vector<double> lp_norms(const ParticleEnsemble& e, const std::vector<double>& ps);

// f_B(t_k, y) = datum(Z(0, t_k, y)) through the stored field history; optional z-gradient.
std::vector<double> evaluate_state(const ForwardTrajectory& fwd, int k, const std::vector<Vec6>& ys,
                                   std::vector<Vec6>* grads = nullptr, Exec ex = Exec::parallel);

ControlField zero_control(const RunConfig& cfg);
TimeGrid time_grid(const RunConfig& cfg);
SpatialGrid spatial_grid(const RunConfig& cfg);
InitialDatum initial_datum(const RunConfig& cfg);
ParticleEnsemble initial_ensemble(const RunConfig& cfg);

}  // namespace vpc
