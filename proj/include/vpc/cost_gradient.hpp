#pragma once

#include <memory>

#include "vpc/tangent_adjoint.hpp"

namespace vpc {

struct CostReport {
    double J = 0;
    double tracking = 0;        // 1/2 ||f_B(T) - f_d||^2
    double regularization = 0;  // lambda/2 <B, A B>, A = -Delta closed by the exterior harmonic extension
    bool has_gradient = false;
    ControlField gradient;
    double gradient_dual = 0;   // sup over unit H of <G, H>
};

double tracking_term(const ForwardTrajectory& fwd, const Target& fd);
double regularization_term(const ControlField& B, double lambda);
CostReport cost(const ForwardTrajectory& fwd, const Target& fd, double lambda);

// p(t_k, X_m) = h^-3 sum_i w_i g_i W_m(x_i) (v_i x d_v f_i)
ControlField coupling_field(const ForwardTrajectory& fwd, const CostateSolution& g);
// G = lambda A B + p
ControlField gradient(const ForwardTrajectory& fwd, const CostateSolution& g, double lambda);

// <f_B(T) - f_d, f'(T)> + lambda <B, A H>
double directional_derivative_tangent(const ForwardTrajectory& fwd, const Target& fd, const ControlField& H,
                                      const LinearSolution& tang, double lambda);

// J-terms minus the pairing of the transport residual (time difference along the markers) with g.
// f and g are carrier values laid out (k * n + i) on the forward markers.
double lagrangian(const ForwardTrajectory& fwd, const std::vector<double>& f, const std::vector<double>& g,
                  const Target& fd, double lambda);

// lambda <H1, A H2> - int (v x H1) . (d_v f_B g'[H2] - d_v g_B f'[H2])
double second_derivative(const ForwardTrajectory& fwd, const ControlField& H1, const ControlField& H2,
                         const LinearSolution& tang2, const LinearSolution& gprime2, const CostateSolution& g,
                         double lambda);

// Bundles config, marker set, target and the interaction operator for repeated evaluations.
class ControlProblem {
public:
    ControlProblem(const RunConfig& cfg, std::shared_ptr<const Target> fd, Exec ex = Exec::parallel);

    const RunConfig& config() const { return cfg_; }
    const Target& target() const { return *fd_; }
    std::shared_ptr<const Target> target_ptr() const { return fd_; }
    const ParticleEnsemble& ensemble() const { return ens_; }
    const InitialDatum& datum() const { return datum_; }
    Interaction& interaction() { return *inter_; }
    GridInteraction& grid_interaction() { return *inter_; }
    PicardOptions picard() const;
    Exec exec() const { return ex_; }

    ForwardTrajectory forward(const ControlField& B, bool gradients = true) const;
    double J(const ControlField& B) const;
    // forward, cost and (optionally) costate + gradient; the intermediate solves are returned on request
    CostReport evaluate(const ControlField& B, bool with_gradient, ForwardTrajectory* fwd_out = nullptr,
                        CostateSolution* g_out = nullptr);
    LinearSolution tangent(const ForwardTrajectory& fwd, const ControlField& H);
    CostateSolution costate(const ForwardTrajectory& fwd, bool gradients = true);
    // J''(B)[H1, H2]
    double second(const ForwardTrajectory& fwd, const CostateSolution& g, const ControlField& H1,
                  const ControlField& H2);

private:
    RunConfig cfg_;
    std::shared_ptr<const Target> fd_;
    InitialDatum datum_;
    ParticleEnsemble ens_;
    Exec ex_;
    std::unique_ptr<GridInteraction> inter_;
};

}  // namespace vpc
