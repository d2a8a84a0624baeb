#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vpc/common.hpp"

namespace vpc {

// Run parameters. Field names double as config-file keys.
struct RunConfig {
    double T = 0.5;
    double lambda = 1e-3;
    double K = 10.0;
    double gamma = 0.5;
    double eps_kernel = 0.0;  // 0 until resolved; parse_config defaults it to the grid spacing
    double dt = 0.01;
    int n_particles = 20000;
    double L = 2.0;
    int n = 16;
    double picard_tol = 1e-10;
    int picard_max_iter = 30;

    double datum_c = 1.0;
    double datum_r = 1.0;
    int lattice_n = 7;
    double jitter = 0.0;

    int opt_max_iter = 50;
    double opt_step0 = 1.0;
    double opt_armijo = 1e-4;
    double opt_backtrack = 0.5;
    int opt_max_backtracks = 30;
    double opt_tol = 1e-4;
    double unique_threshold = 0.2;

    double tol_conservation = 0.01;
    double tol_frechet = 0.05;
    double tol_duality = 1e-2;
    double tol_second = 0.05;
    double tol_tracking = 0.9;
    double tol_frj = 0.1;
    double tol_stationarity = 1e-3;
    double tol_unique = 0.05;
    double tol_oracle = 0.05;

    std::uint64_t seed = 1;

    int steps() const;
    double h() const { return 2.0 * L / (n - 1); }
    // Throws Error("invalid config", "<key> must be ...") on the first violated invariant.
    void validate() const;
    bool operator==(const RunConfig&) const = default;
};

struct TimeGrid {
    double T = 0;
    int steps = 0;
    double dt = 0;

    TimeGrid() = default;
    TimeGrid(double T_, int steps_);
    static TimeGrid from_dt(double T, double dt);
    int nodes() const { return steps + 1; }
    double t(int k) const { return k == steps ? T : k * dt; }
    // Trapezoid weights for integrals over [0,T].
    double weight(int k) const { return (k == 0 || k == steps) ? 0.5 * dt : dt; }
};

struct SpatialGrid {
    double L = 0;
    int n = 0;
    double h = 0;

    SpatialGrid() = default;
    SpatialGrid(double L_, int n_);
    int size() const { return n * n * n; }
    int index(int i, int j, int k) const { return (i * n + j) * n + k; }
    double coord(int i) const { return -L + i * h; }
    Vec3 node(int m) const;
    double cell_volume() const { return h * h * h; }
    bool operator==(const SpatialGrid& o) const { return L == o.L && n == o.n; }

    // Trilinear stencil: 8 node indices and weights. Returns false (weights zero) outside the cube.
    bool stencil(const Vec3& x, int idx[8], double w[8]) const;
    // Same plus d(weight)/dx for each node.
    bool stencil_grad(const Vec3& x, int idx[8], double w[8], double dw[8][3]) const;
};

// Magnetic field on time nodes x spatial nodes; trilinear in space, linear in time, zero outside.
struct ControlField {
    TimeGrid time;
    SpatialGrid grid;
    std::vector<double> data;  // ((k * nodes + m) * 3 + c)

    ControlField() = default;
    ControlField(const TimeGrid& tg, const SpatialGrid& sg);

    double* at(int k, int m) { return &data[(static_cast<size_t>(k) * grid.size() + m) * 3]; }
    const double* at(int k, int m) const { return &data[(static_cast<size_t>(k) * grid.size() + m) * 3]; }
    size_t slice_size() const { return static_cast<size_t>(grid.size()) * 3; }

    Vec3 eval_node_time(int k, const Vec3& x) const;
    Vec3 eval(double t, const Vec3& x) const;
    // Value and spatial Jacobian (row c = component, col = d/dx_col).
    Vec3 eval_grad(double t, const Vec3& x, Mat3& jac) const;

    bool compatible(const ControlField& o) const { return time.steps == o.time.steps && time.T == o.time.T && grid == o.grid; }
    ControlField& operator+=(const ControlField& o);
    ControlField& operator*=(double s);
    void axpy(double a, const ControlField& x);
    void set_zero();
};

ControlField operator+(ControlField a, const ControlField& b);
ControlField operator-(ControlField a, const ControlField& b);
ControlField operator*(double s, ControlField a);

// f(z) = c * max(0, 1 - |z|^2/r^2)^3
struct InitialDatum {
    double c = 1.0;
    double r = 1.0;
    double value(const Vec6& z) const;
    Vec6 grad(const Vec6& z) const;
    double value_grad(const Vec6& z, Vec6& g) const;
};

struct ParticleEnsemble {
    std::vector<Vec6> z;
    std::vector<double> f;
    std::vector<double> w;
    size_t size() const { return z.size(); }
    double mass() const;
    double max_radius() const;
};

// Cell-centred lattice of the given spacing restricted to |z| < r.
ParticleEnsemble sample_lattice_ensemble(const InitialDatum& datum, double spacing, double jitter = 0.0,
                                         std::uint64_t seed = 0);
// Lattice spacing picked so that roughly n markers fall inside the support ball.
ParticleEnsemble sample_initial_ensemble(const InitialDatum& datum, int n, std::uint64_t seed = 0,
                                         double jitter = 0.0);
double lattice_spacing_for(double radius, int n);

// ---- discrete differential operators on one time slice (3 components per node) ----
// Forward differences on edges, Neumann Laplacian L = D^T D, Hessian via L_a and D_a D_b.
void apply_laplacian(const SpatialGrid& g, const double* in, double* out);
double grad_sq(const SpatialGrid& g, const double* in);     // sum over edges |D B|^2 * h^3
double hessian_sq(const SpatialGrid& g, const double* in);  // sum over Hessian entries |.|^2 * h^3
double value_sq(const SpatialGrid& g, const double* in);    // sum over nodes |B|^2 * h^3

// L^2(time x space) inner product with trapezoid weights in time and h^3 in space.
double l2_inner(const ControlField& a, const ControlField& b);
// sum_k tau_k <D a, D b>
double grad_inner(const ControlField& a, const ControlField& b);
double v_norm(const ControlField& B);
double v_inner(const ControlField& a, const ControlField& b);
// Riesz representative in the V inner product: solves (I + L + L^2) X = G slice by slice.
ControlField v_riesz(const ControlField& G);
// sup over ||H||_V = 1 of <G, H>
double dual_norm(const ControlField& G);
// -Delta B = L B on every time slice
ControlField neg_laplacian(const ControlField& B);

// ---- regularizer: -Delta with the exterior filled by the lattice-harmonic extension to R^3 ----
// Unit-lattice Green's function of the 7-point -Delta on Z^3, table over offsets [0, n)^3.
std::vector<double> lattice_green_table(int n);
// Interior rows are the 7-point stencil; boundary rows carry the exterior Dirichlet-to-Neumann block.
void apply_exterior_laplacian(const SpatialGrid& g, const double* in, double* out);
// sum_k tau_k h^3 <a, A b>
double reg_inner(const ControlField& a, const ControlField& b);
ControlField reg_laplacian(const ControlField& B);

}  // namespace vpc
