#pragma once

#include <memory>
#include <vector>

#include "vpc/phase_model.hpp"

namespace vpc {

// K(d) = 1/sqrt(|d|^2 + eps^2)
struct MollifiedKernel {
    double eps = 0.1;

    explicit MollifiedKernel(double e = 0.1);
    double value(const Vec3& d) const { return 1.0 / std::sqrt(dot(d, d) + eps * eps); }
    Vec3 grad(const Vec3& d) const {
        const double s = dot(d, d) + eps * eps;
        const double q = -1.0 / (s * std::sqrt(s));
        return {q * d[0], q * d[1], q * d[2]};
    }
    Mat3 hessian(const Vec3& d) const;
};

// ---- direct marker summation -------------------------------------------------

double psi(const ParticleEnsemble& e, const Vec3& x, const MollifiedKernel& k);
Vec3 grad_psi(const ParticleEnsemble& e, const Vec3& x, const MollifiedKernel& k);
std::vector<double> psi_many(const ParticleEnsemble& e, const std::vector<Vec3>& xs, const MollifiedKernel& k,
                             Exec ex = Exec::parallel);
std::vector<Vec3> grad_psi_many(const ParticleEnsemble& e, const std::vector<Vec3>& xs, const MollifiedKernel& k,
                                Exec ex = Exec::parallel);

// Phi_{a,f}(x) = sum_i w_i f_i dva_i . gradK(x - x_i); dva holds d_v a at the markers.
double phi_field(const ParticleEnsemble& f, const std::vector<Vec3>& dva, const Vec3& x, const MollifiedKernel& k);
std::vector<double> phi_field_many(const ParticleEnsemble& f, const std::vector<Vec3>& dva, const std::vector<Vec3>& xs,
                                   const MollifiedKernel& k, Exec ex = Exec::parallel);

// [Phi']_j(x) = sum_i w_i sum_c (d_vc a d_xj f - d_vc f d_xj a)_i d_c K(x - x_i)
Vec3 phi_prime(const ParticleEnsemble& f, const std::vector<Vec6>& grad_f, const std::vector<Vec6>& grad_a,
               const Vec3& x, const MollifiedKernel& k);

// Optimal-control representation on every grid node from f-markers and the v-gradient of g at the same markers:
// B(x) = 1/(4 pi lambda) sum_i w_i f_i K(x - x_i) (v_i x d_v g_i). Slice layout (m*3+c).
std::vector<double> control_from_fg(const ParticleEnsemble& f, const std::vector<Vec6>& grad_g, double lambda,
                                    const SpatialGrid& grid, const MollifiedKernel& k, Exec ex = Exec::parallel);
// Same representation without integration by parts: -1/(4 pi lambda) sum w_i g_i K (v_i x d_v f_i).
std::vector<double> control_from_fg_direct(const ParticleEnsemble& f, const std::vector<Vec6>& grad_f,
                                           const std::vector<double>& g, double lambda, const SpatialGrid& grid,
                                           const MollifiedKernel& k, Exec ex = Exec::parallel);

// ---- grid convolution ----------------------------------------------------------

enum class KernelPart { value = 0, d1, d2, d3, d11, d12, d13, d22, d23, d33, count };

// Free-space convolution of node charges with the kernel or its derivatives on a SpatialGrid.
// FFT path uses zero padding to 2n, so it reproduces the direct node sum to round-off.
class GridConvolver {
public:
    GridConvolver(const SpatialGrid& g, const MollifiedKernel& k);
    ~GridConvolver();
    GridConvolver(const GridConvolver&) = delete;
    GridConvolver& operator=(const GridConvolver&) = delete;

    const SpatialGrid& grid() const { return grid_; }
    const MollifiedKernel& kernel() const { return kernel_; }

    // out_m = sum_m' G(X_m - X_m') rho_m' for each requested part. out[p] sized n^3.
    void convolve(const double* rho, const std::vector<KernelPart>& parts, std::vector<std::vector<double>>& out);
    // out_m = sum_c sum_m' G_c(X_m - X_m') q_c,m' (q layout m*3+c), G_c = part[c]
    void convolve_sum(const double* q3, const KernelPart parts[3], double* out);
    // Direct O(N^2) reference.
    void convolve_direct(const double* rho, KernelPart part, double* out, Exec ex = Exec::parallel) const;
    double kernel_part(KernelPart p, const Vec3& d) const;

private:
    SpatialGrid grid_;
    MollifiedKernel kernel_;
    int P_;
    size_t nreal_, ncplx_;
    double* rbuf_;
    void* cbuf_;
    void* accum_;
    std::vector<void*> spectra_;
    void* plan_r2c_;
    void* plan_c2r_;
    void load_padded(const double* rho, int stride, int offset);
    void extract(double* out) const;
};

// Operators used by the solvers: for carriers at positions x_i with charges,
// grad_psi: d_x psi_q(x_i);  phi: sum_j Q_j . gradK(x_i - x_j);  grad_phi: d_x of phi.
class Interaction {
public:
    virtual ~Interaction() = default;
    virtual void grad_psi(const std::vector<Vec3>& x, const std::vector<double>& q, std::vector<Vec3>& out) = 0;
    virtual void phi(const std::vector<Vec3>& x, const std::vector<Vec3>& Q, std::vector<double>& out) = 0;
    virtual void grad_phi(const std::vector<Vec3>& x, const std::vector<Vec3>& Q, std::vector<Vec3>& out) = 0;
};

// Direct mollified pair sums (O(N^2)); self-pairs contribute zero since gradK(0) = 0.
class DirectInteraction : public Interaction {
public:
    explicit DirectInteraction(const MollifiedKernel& k, Exec ex = Exec::parallel) : k_(k), ex_(ex) {}
    void grad_psi(const std::vector<Vec3>& x, const std::vector<double>& q, std::vector<Vec3>& out) override;
    void phi(const std::vector<Vec3>& x, const std::vector<Vec3>& Q, std::vector<double>& out) override;
    void grad_phi(const std::vector<Vec3>& x, const std::vector<Vec3>& Q, std::vector<Vec3>& out) override;

private:
    MollifiedKernel k_;
    Exec ex_;
};

// Cloud-in-cell deposit, grid convolution, trilinear interpolation (interpolation = deposit^T).
class GridInteraction : public Interaction {
public:
    GridInteraction(const SpatialGrid& g, const MollifiedKernel& k, Exec ex = Exec::parallel);
    void grad_psi(const std::vector<Vec3>& x, const std::vector<double>& q, std::vector<Vec3>& out) override;
    void phi(const std::vector<Vec3>& x, const std::vector<Vec3>& Q, std::vector<double>& out) override;
    void grad_phi(const std::vector<Vec3>& x, const std::vector<Vec3>& Q, std::vector<Vec3>& out) override;

    // node charges from carrier charges (ncomp values per carrier)
    void deposit(const std::vector<Vec3>& x, const double* q, int ncomp, std::vector<double>& rho) const;
    // field (ncomp per node) at carrier positions
    void interpolate(const std::vector<Vec3>& x, const std::vector<double>& field, int ncomp, double* out) const;
    // E = d_x psi on grid nodes for node charges rho
    void grad_psi_grid(const std::vector<double>& rho, std::vector<double>& E3);
    GridConvolver& convolver() { return conv_; }
    const SpatialGrid& grid() const { return conv_.grid(); }

private:
    GridConvolver conv_;
    Exec ex_;
};

}  // namespace vpc
