// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <random>

#include "nwi/adjoint.hpp"
#include "nwi/forward.hpp"
#include "nwi/fwi.hpp"

using namespace nwi;

namespace {

PropertySet bench_props(int n) {
  Field c(n, n), q(n, n), d(n, n), b(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      c(i, j) = 1480.0 + 40.0 * std::sin(0.1 * i) * std::cos(0.07 * j);
      q(i, j) = 1000.0 + 30.0 * std::cos(0.05 * (i + j));
      d(i, j) = 20.0;
      b(i, j) = 3.0;
    }
  return PropertySet(std::move(c), std::move(q), std::move(d), std::move(b));
}

SimulationGrid bench_grid(int n, int nt) {
  return SimulationGrid(n, n, nt, 5e-4, 0.4 * 5e-4 / 1600.0);
}

PulseField bench_pulse(const SimulationGrid& g) {
  PulseField pulse(g.nx, g.nz, g.nt);
  std::vector<double> tr(g.nt, 0.0);
  for (int n = 2; n < std::min(g.nt, 30); ++n) tr[n] = 1e18 * std::sin(0.3 * n);
  pulse.add_source(g.nx / 2, g.nz / 2, std::move(tr));
  return pulse;
}

}  // namespace

static void BM_WesterveltStep(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const SimulationGrid g = bench_grid(n, 8);
  const PropertySet props = bench_props(n);
  const Field d_eff = props.attenuation;
  const StepCoefficients co(props, d_eff, g);
  Field u1(n, n, 1.0), u2(n, n, 0.5), f(n, n, 0.0), out(n, n);
  Field gx(n, n), gz(n, n), lap(n, n);
  for (auto _ : state) {
    westervelt_step_into(co, u1, u2, f, 2, out, nullptr, gx, gz, lap);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_WesterveltStep)->Arg(32)->Arg(64)->Arg(128)->Arg(256);

static void BM_ForwardWithTape(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const SimulationGrid g = bench_grid(n, 100);
  const PropertySet props = bench_props(n);
  const PulseField pulse = bench_pulse(g);
  const auto geom = ProbeGeometry::linear(1, 1, 4, 1);
  for (auto _ : state) {
    auto r = forward_with_tape(props, pulse, g, PmlConfig{0, 0.0}, geom);
    benchmark::DoNotOptimize(r.first.samples.data());
  }
}
BENCHMARK(BM_ForwardWithTape)->Arg(24)->Arg(48)->Arg(96);

static void BM_Backprop(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const SimulationGrid g = bench_grid(n, 100);
  const PropertySet props = bench_props(n);
  const PulseField pulse = bench_pulse(g);
  const auto geom = ProbeGeometry::linear(1, 1, 4, 1);
  auto [ch, tape] = forward_with_tape(props, pulse, g, PmlConfig{0, 0.0}, geom);
  for (auto _ : state) {
    auto grads = backprop(tape, ch);
    benchmark::DoNotOptimize(grads.d_sos.data());
  }
}
BENCHMARK(BM_Backprop)->Arg(24)->Arg(48)->Arg(96);

static void BM_FwiGradient(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const SimulationGrid g = bench_grid(n, 16);
  const PropertySet props = bench_props(n);
  const PulseField pulse = bench_pulse(g);
  const auto geom = ProbeGeometry::linear(1, 1, 4, 1);
  const LinearWaveOperator A =
      assemble_linear(props.sos, props.density, props.attenuation, g);
  const std::vector<double> f = pulse_to_vector(pulse, g);
  const std::vector<double> u = solve_wavefield(A, f);
  ChannelData res(geom.nc(), g.nt, g.dt);
  for (size_t k = 0; k < res.samples.size(); ++k) res.samples[k] = 1.0;
  for (auto _ : state) {
    auto grads = fwi_gradient(A, u, res, geom, props.sos, props.density, props.attenuation);
    benchmark::DoNotOptimize(grads.d_sos.data());
  }
}
BENCHMARK(BM_FwiGradient)->Arg(6)->Arg(8)->Arg(12);

BENCHMARK_MAIN();
