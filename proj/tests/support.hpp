#pragma once

#include "vpc/forward_solver.hpp"

// Desk-sized run: a few hundred markers, coarse grid, short horizon.
inline vpc::RunConfig small_config(int markers = 800) {
    vpc::RunConfig c;
    c.T = 0.2;
    c.dt = 0.02;
    c.n = 10;
    c.n_particles = markers;
    c.eps_kernel = c.h();
    return c;
}

inline vpc::ControlField uniform_field(const vpc::RunConfig& c, const vpc::Vec3& b) {
    vpc::ControlField B = vpc::zero_control(c);
    for (int k = 0; k < B.time.nodes(); ++k)
        for (int m = 0; m < B.grid.size(); ++m)
            for (int a = 0; a < 3; ++a) B.at(k, m)[a] = b[a];
    return B;
}
