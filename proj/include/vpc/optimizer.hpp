#pragma once

#include <string>
#include <vector>

#include "vpc/cost_gradient.hpp"

namespace vpc {

struct OptimizerOptions {
    int max_iter = 50;
    double step0 = 1.0;      // first trial step moves B by step0 * K / 10 in V-norm
    double armijo = 1e-4;
    double backtrack = 0.5;
    int max_backtracks = 30;
    double tol = 1e-4;       // stop when dual_norm(G) <= tol * dual_norm(G_0)
    double abs_tol = 1e-14;  // stationary start
    bool spectral = true;    // Barzilai-Borwein trial steps
};

OptimizerOptions optimizer_options(const RunConfig& cfg);

struct IterationRecord {
    int iter = 0;
    double J = 0, tracking = 0, regularization = 0;
    double grad_dual = 0;  // sup_{||H||_V = 1} <G, H>
    double step = 0;       // accepted step length (0 at the start point)
    double norm = 0;       // v_norm(B)
    bool projected = false;
    int backtracks = 0;
};

struct OptimizationTrace {
    std::vector<IterationRecord> iters;
    ControlField B;
    CostReport final;
    std::string status;  // converged | stationary | max_iter | stalled
    bool monotone() const;
};

// Radial scaling onto {v_norm <= K}.
ControlField project_ball(const ControlField& B, double K);

// Projected gradient in the V metric: B <- P_K(B - s * Riesz(G)), backtracking on J.
OptimizationTrace minimize(ControlProblem& P, const ControlField& B0, const OptimizerOptions& opt);

// Smooth random field: low cosine modes per axis, linear in time, zero mean in space.
ControlField band_limited_field(const TimeGrid& tg, const SpatialGrid& sg, std::uint64_t seed, int max_mode = 2);

struct VariationalReport {
    double min_pairing = 0;    // min over the panel of <G, B - Bbar>
    double max_unit_pairing = 0;  // sup over unit H of |<G, H>|
    std::vector<double> pairings;
};

VariationalReport variational_inequality_check(const ControlField& Bbar, const ControlField& G,
                                               const std::vector<ControlField>& panel);

struct OptimalityResidual {
    double convolution = 0;      // ||Bbar - B_rep|| / ||Bbar||, B_rep built from g and w x d_v f
    double convolution_ibp = 0;  // same with d_v moved onto g (f times w x d_v g)
    double laplacian = 0;           // ||-lambda Delta Bbar + p|| / ||p||
};

// -1/(4 pi lambda) K * p on the grid, from the costate gradients (ibp) or from f-gradients and g values.
ControlField representation_field(ControlProblem& P, const ForwardTrajectory& fwd, const CostateSolution& g,
                                  bool ibp = false);
OptimalityResidual optimality_residual(ControlProblem& P, const ControlField& Bbar, const ForwardTrajectory& fwd,
                                       const CostateSolution& g);

struct SufficientReport {
    double alpha = 2;
    double min_second = 0;  // min J''[H, H] over unit H
    double eps_hat = 0;
    int degenerate = 0;     // samples with J'' <= 0
    bool growth_verified = false;
    double delta = 0;       // largest s tested on the ray panel
    std::vector<double> samples;
    std::string conclusion;
};

SufficientReport sufficient_condition_probe(ControlProblem& P, const ControlField& Bbar, double alpha, int n_samples,
                                            std::uint64_t seed, const std::vector<double>& ray = {0.2, 0.1, 0.05});

struct UniquenessReport {
    double T_over_lambda = 0;
    std::vector<OptimizationTrace> runs;
    double max_control_distance = 0;  // pairwise v_norm distances
    double max_state_distance = 0;    // pairwise L2 distances of terminal states
    bool any_stalled = false;
    bool below_threshold = true;
};

UniquenessReport uniqueness_experiment(ControlProblem& P, int n_starts, const OptimizerOptions& opt,
                                       std::uint64_t seed, double start_radius_fraction = 0.5);

}  // namespace vpc
