#pragma once

#include <functional>
#include <vector>

#include "vpc/phase_model.hpp"

namespace vpc {

// Acceleration held constant on each time interval, stored on a spatial grid (zero outside).
struct AccelHistory {
    TimeGrid time;
    SpatialGrid grid;
    std::vector<double> data;  // ((interval * nodes + m) * 3 + c)

    AccelHistory() = default;
    AccelHistory(const TimeGrid& tg, const SpatialGrid& sg)
        : time(tg), grid(sg), data(static_cast<size_t>(tg.steps) * sg.size() * 3, 0.0) {}
    double* slice(int interval) { return &data[static_cast<size_t>(interval) * grid.size() * 3]; }
    const double* slice(int interval) const { return &data[static_cast<size_t>(interval) * grid.size() * 3]; }
    Vec3 eval(int interval, const Vec3& x, Mat3* jac) const;
    // sqrt(sum_k dt max_x |A|^2), the L2(0,T;Linf) norm over grid nodes
    double l2_linf() const;
};

// Transport field z' = (v, A(s,x) + v x B(s,x)).
struct FlowField {
    TimeGrid time;
    // interval index, time, position -> acceleration (and its x-Jacobian if jac != nullptr)
    std::function<Vec3(int, double, const Vec3&, Mat3*)> accel;
    const ControlField* B = nullptr;

    static FlowField from_history(const AccelHistory* A, const ControlField* B);
    static FlowField free(const TimeGrid& tg) { return FlowField{tg, {}, nullptr}; }
    int interval_of(double t) const;
};

Vec6 transport_rhs(const FlowField& F, int interval, double t, const Vec6& z, Mat6* DF = nullptr);

// One classical RK4 step of length h starting at t inside the given interval (h may be negative).
Vec6 rk4_step(const FlowField& F, int interval, double t, double h, const Vec6& z, Mat6* jac = nullptr);
// Step between adjacent time nodes: forward k -> k+1 or backward k+1 -> k.
Vec6 node_step(const FlowField& F, int k, bool forward, const Vec6& z, Mat6* jac = nullptr);

// Z(s, t, z): value at time s of the characteristic through z at time t.
Vec6 flow(const FlowField& F, double t, const Vec6& z, double s);
// Central finite-difference Jacobian of flow with respect to z.
Mat6 flow_jacobian(const FlowField& F, double t, const Vec6& z, double s, double h_fd);

// Support bound e^{2T}(r + sqrt(T) a_norm).
double zeta(double r, double T, double a_norm);

Mat6 matmul6(const Mat6& a, const Mat6& b);
Mat6 transpose6(const Mat6& a);
double det6(const Mat6& a);
Mat6 inverse6(const Mat6& a);
Vec6 matvec6(const Mat6& a, const Vec6& x);
Vec6 matTvec6(const Mat6& a, const Vec6& x);

}  // namespace vpc
