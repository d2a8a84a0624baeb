#pragma once

#include <memory>
#include <vector>

#include "vpc/forward_solver.hpp"
#include "vpc/linear_vlasov.hpp"

namespace vpc {

// Desired terminal distribution f_d, evaluated pointwise (with optional z-gradients).
class Target {
public:
    virtual ~Target() = default;
    virtual std::vector<double> values(const std::vector<Vec6>& z, std::vector<Vec6>* grads = nullptr) const = 0;
};

class ZeroTarget : public Target {
public:
    std::vector<double> values(const std::vector<Vec6>& z, std::vector<Vec6>* grads) const override;
};

// Bump datum translated by a fixed phase-space offset.
class DatumTarget : public Target {
public:
    DatumTarget(const InitialDatum& d, const Vec6& shift = {}) : datum_(d), shift_(shift) {}
    std::vector<double> values(const std::vector<Vec6>& z, std::vector<Vec6>* grads) const override;

private:
    InitialDatum datum_;
    Vec6 shift_;
};

// f_{B*}(T) of a stored reference solve, through its field history.
class TwinTarget : public Target {
public:
    explicit TwinTarget(std::shared_ptr<const ForwardTrajectory> ref) : ref_(std::move(ref)) {}
    std::vector<double> values(const std::vector<Vec6>& z, std::vector<Vec6>* grads) const override;
    const ForwardTrajectory& reference() const { return *ref_; }

private:
    std::shared_ptr<const ForwardTrajectory> ref_;
};

// g_B on the forward markers plus its z-gradient at every time node.
struct CostateSolution {
    LinearSolution sol;
    std::vector<Vec6> grad;  // (k * n + i), empty if not requested
    Cutoff chi;
    double value(int k, size_t i) const { return sol.value(k, i); }
    const Vec6& grad_at(int k, size_t i) const { return grad[static_cast<size_t>(k) * sol.n + i]; }
};

// Terminal mismatch f_B(T) - f_d at the forward markers.
std::vector<double> terminal_mismatch(const ForwardTrajectory& fwd, const Target& fd, std::vector<Vec6>* grads = nullptr);

// f'_B[H] on the forward markers (zero datum at t = 0). Needs fwd with gradients.
LinearSolution tangent(const ForwardTrajectory& fwd, const ControlField& H, Interaction& inter,
                       const PicardOptions& opt);

// g_B, final value f_B(T) - f_d, coupled through chi Phi_{f_B, g}.
CostateSolution costate(const ForwardTrajectory& fwd, const Target& fd, Interaction& inter, const PicardOptions& opt,
                        bool gradients = true);

// g'_B[H]: final value f'_B[H](T); sources from the tangent and the costate.
LinearSolution costate_derivative(const ForwardTrajectory& fwd, const ControlField& H, const LinearSolution& tang,
                                  const CostateSolution& g, Interaction& inter, const PicardOptions& opt);

// Cell-averaged density on a phase-space lattice (multilinear deposit), gradients by central differences.
struct PhaseLattice {
    double r = 1;  // covers [-r, r]^6
    int n = 7;     // nodes per axis
    double spacing = 0;
    std::vector<double> values;

    PhaseLattice(double r_, int n_);
    size_t size() const { return values.size(); }
    Vec6 node(size_t m) const;
    size_t index(const int j[6]) const;
    // multilinear interpolation, zero outside
    double eval(const Vec6& z) const;
    // central differences at a node (one-sided on the faces)
    Vec6 grad_node(size_t m) const;
    // multilinear interpolation of node gradients
    Vec6 grad(const Vec6& z) const;
};

// Throws Error("support escape", ids...) if markers leave the lattice.
PhaseLattice lattice_deposit(const ParticleEnsemble& e, double r, int n);

}  // namespace vpc
