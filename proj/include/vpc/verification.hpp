#pragma once

#include <iosfwd>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "vpc/optimizer.hpp"

namespace vpc {

struct ProbeRow {
    double size = 0;   // perturbation size, iteration index or time
    double value = 0;  // measured quantity
    double ratio = 0;  // value normalised by size (or by the reference quantity)
};

struct ProbeReport {
    std::string name;
    std::string anchor;  // the estimate or identity this probe stands in for
    std::string units;   // meaning and units of size / value / ratio
    std::vector<ProbeRow> rows;
    double exponent = std::numeric_limits<double>::quiet_NaN();
    double constant = std::numeric_limits<double>::quiet_NaN();
    int fit_points = 0;
    double metric = 0;  // compared against tol
    double tol = 0;
    bool required = true;
    bool passed = false;
    std::string note;
};

// Least squares of log y = log c + p log x; needs at least 4 positive points.
struct LogLogFit {
    double exponent = 0, constant = 0;
    int points = 0;
};
LogLogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

// Smooth test fields: amp * dir * exp(-|x - centre|^2 / sigma^2) * cos(tfreq * t).
ControlField gaussian_field(const RunConfig& cfg, const Vec3& dir, const Vec3& centre, double sigma, double amp,
                            double tfreq = 0.0);
// Seeded panel of smooth directions scaled to v_norm = scale.
std::vector<ControlField> direction_panel(const RunConfig& cfg, int count, std::uint64_t seed, double scale);

// Known control for twin runs: z-directed bump with v_norm = K / 2.
ControlField twin_control(const RunConfig& cfg);
std::shared_ptr<TwinTarget> twin_target(const RunConfig& cfg, const ControlField& Bstar);

ProbeReport conservation_probe(const ForwardTrajectory& fwd, double tol);
ProbeReport frechet_probe(ControlProblem& P, const ControlField& B, const ControlField& H,
                          const std::vector<double>& hs, double tol);
// State Lipschitz bound plus the Hoelder trends of d_z f and d_t f, measured as sup over a 6D ball lattice.
std::vector<ProbeReport> lipschitz_probe(ControlProblem& P, const ControlField& B, const ControlField& D,
                                         const std::vector<double>& sizes, int lattice_n = 7);
// f'_{B+sD}[H](T) against f'_B[H](T), both deposited on a common phase lattice.
ProbeReport tangent_holder_probe(ControlProblem& P, const ControlField& B, const ControlField& H,
                                 const ControlField& D, const std::vector<double>& sizes, int lattice_n = 7);
// g_{B+sD} against g_B at t = 0 on the shared initial markers.
ProbeReport costate_holder_probe(ControlProblem& P, const ControlField& B, const ControlField& D,
                                 const std::vector<double>& sizes);
ProbeReport duality_probe(ControlProblem& P, const ControlField& B, const std::vector<ControlField>& panel,
                          double tol);
ProbeReport second_derivative_probe(ControlProblem& P, const ControlField& B, const ControlField& H, double h,
                                    double tol);

// C = 0, a = datum, b = datum, along the forward flow of B. Carrier: forward markers plus a shell lattice out to r2.
struct StandardLinearTest {
    ForwardTrajectory fwd;
    Carrier carrier;
    LinearVlasovProblem problem;
    Cutoff chi;
    double r0 = 1;
};
StandardLinearTest standard_linear_test(ControlProblem& P, const ControlField& B, int shell_n = 7);
// Contraction of the Picard log and cutoff independence on the core ball.
std::vector<ProbeReport> picard_probe(ControlProblem& P, const ControlField& B, double min_factor = 2.0);

struct TwinReport {
    OptimizationTrace trace;
    double tracking_reduction = 0;  // 1 - tracking(final) / tracking(B0)
    double stationarity = 0;        // dual_norm(G final) / dual_norm(G initial)
    VariationalReport variational;
    OptimalityResidual residual;
};
TwinReport twin_experiment(ControlProblem& P, const OptimizerOptions& opt);

struct SuiteOptions {
    bool optimization = false;  // twin run and uniqueness starts
    std::uint64_t seed = 1;
};

struct SuiteReport {
    std::vector<ProbeReport> probes;
    double seconds = 0;
    bool passed() const;
};

// Every probe at desk scale; failures are collected, errors inside a probe become a failed row.
SuiteReport run_all(const RunConfig& cfg, const SuiteOptions& opt = {});

void write_probe_csv(std::ostream& os, const std::vector<ProbeReport>& probes);
std::string suite_summary(const SuiteReport& r);

}  // namespace vpc
