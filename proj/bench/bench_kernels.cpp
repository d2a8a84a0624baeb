#include <benchmark/benchmark.h>

#include "vpc/forward_solver.hpp"
#include "vpc/kernel_fields.hpp"

using namespace vpc;

namespace {

RunConfig bench_config(int markers) {
    RunConfig c;
    c.n_particles = markers;
    c.T = 0.1;
    c.eps_kernel = c.h();
    return c;
}

void BM_Forward(benchmark::State& st, Exec ex) {
    const RunConfig c = bench_config(static_cast<int>(st.range(0)));
    const ParticleEnsemble e = initial_ensemble(c);
    const ControlField B = zero_control(c);
    ForwardOptions o;
    o.exec = ex;
    for (auto _ : st) benchmark::DoNotOptimize(solve_vp(e, initial_datum(c), B, c, o).f.data());
    st.counters["markers"] = static_cast<double>(e.size());
}

void BM_GradPsi(benchmark::State& st, bool direct, Exec ex) {
    const RunConfig c = bench_config(static_cast<int>(st.range(0)));
    const ParticleEnsemble e = initial_ensemble(c);
    std::vector<Vec3> x(e.size());
    std::vector<double> q(e.size());
    for (size_t i = 0; i < e.size(); ++i) {
        x[i] = pos(e.z[i]);
        q[i] = e.w[i] * e.f[i];
    }
    DirectInteraction d(MollifiedKernel(c.eps_kernel), ex);
    GridInteraction g(spatial_grid(c), MollifiedKernel(c.eps_kernel), ex);
    Interaction& I = direct ? static_cast<Interaction&>(d) : static_cast<Interaction&>(g);
    std::vector<Vec3> out;
    for (auto _ : st) {
        I.grad_psi(x, q, out);
        benchmark::DoNotOptimize(out.data());
    }
    st.counters["markers"] = static_cast<double>(e.size());
}

}  // namespace

BENCHMARK_CAPTURE(BM_Forward, serial, Exec::serial)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Forward, openmp, Exec::parallel)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_GradPsi, direct_serial, true, Exec::serial)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_GradPsi, direct_openmp, true, Exec::parallel)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_GradPsi, fft_serial, false, Exec::serial)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_GradPsi, fft_openmp, false, Exec::parallel)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
