#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "vpc/characteristics.hpp"
#include "vpc/kernel_fields.hpp"

namespace vpc {

struct ForwardTrajectory;

// Nodes moving along characteristics; positions at every time node, constant weights.
struct Carrier {
    TimeGrid time;
    size_t n = 0;
    const double* w = nullptr;
    const Vec6* z = nullptr;  // (k * n + i)
    std::shared_ptr<std::vector<double>> w_store;
    std::shared_ptr<std::vector<Vec6>> z_store;

    const Vec6& at(int k, size_t i) const { return z[static_cast<size_t>(k) * n + i]; }
    std::vector<Vec3> positions(int k) const;

    // Forward markers as carrier (no copy; fwd must outlive the carrier).
    static Carrier from_forward(const ForwardTrajectory& fwd);
    // Lattice with n_axis points per axis on [-r, r]^6, optionally cut to the ball |z| <= r,
    // started at t = 0 (forward) or t = T (backward) and transported by F.
    static Carrier lattice(double r, int n_axis, const FlowField& F, bool at_final_time, bool ball = true,
                           bool cell_centred = false);
    // Explicit reference-time nodes transported by F.
    static Carrier transported(const std::vector<Vec6>& nodes, const std::vector<double>& weights, const FlowField& F,
                               bool at_final_time);
};

enum class Orientation { initial, final_value };

enum class CutoffProfile { cubic, quintic };

// chi = 1 on |z| <= r1, 0 on |z| >= r2, radial polynomial transition in between.
struct Cutoff {
    double r1 = 1, r2 = 2;
    CutoffProfile profile = CutoffProfile::cubic;
    double value(const Vec6& z) const;
    Vec6 grad(const Vec6& z) const;
};

Cutoff build_cutoff(double r0, double T, double a_norm, CutoffProfile p = CutoffProfile::cubic);

using VecCoef = std::function<Vec3(int k, size_t i, const Vec6& z)>;
using ScalarCoef = std::function<double(int k, size_t i, const Vec6& z)>;

// d_t f + v.d_x f + A.d_v f + (v x B).d_v f = d_x psi_f . C + chi Phi_{a,f} + b along the carrier.
struct LinearVlasovProblem {
    Orientation orientation = Orientation::initial;
    std::vector<double> datum;  // value at each carrier node at t = 0 (initial) or t = T (final)
    VecCoef C;                  // empty: C = 0
    VecCoef dva;                // d_v a; empty: a = 0
    ScalarCoef b;               // empty: b = 0
    std::function<double(const Vec6&)> chi;  // empty: chi = 1
    double r0 = 1.0;
    std::vector<double> start;  // optional first Picard iterate ((k * n + i)); default: sources without coupling
};

struct LinearSolution {
    TimeGrid time;
    size_t n = 0;
    std::vector<double> f;           // (k * n + i)
    std::vector<double> picard_log;  // sup-change per iteration
    int iterations = 0;
    double value(int k, size_t i) const { return f[static_cast<size_t>(k) * n + i]; }
};

struct PicardOptions {
    double tol = 1e-10;
    int max_iter = 30;
    bool throw_on_stall = true;
};

LinearSolution solve_linear(const LinearVlasovProblem& p, const Carrier& c, Interaction& inter,
                            const PicardOptions& opt);

// Ratios log[n+1]/log[n].
std::vector<double> picard_rate(const std::vector<double>& log);

}  // namespace vpc
