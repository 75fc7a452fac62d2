// SPDX-License-Identifier: Apache-2.0
#include "nwi/scaling.hpp"

#include <sys/utsname.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <thread>

#include "nwi/acquisition.hpp"
#include "nwi/adjoint.hpp"
#include "nwi/fwi.hpp"

namespace nwi {

namespace {

struct Fixture {
  SimulationGrid grid;
  PropertySet props;
  PulseField pulse;
  PmlConfig pml;
  ProbeGeometry geom;
};

Fixture make_fixture(int n, int nt) {
  const double dx = 5e-4;
  const double cmax = 1600.0;
  const double dt = 0.4 * dx / cmax;
  SimulationGrid grid(n, n, nt, dx, dt);

  Field c(n, n), q(n, n), d(n, n), b(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double u = static_cast<double>(i) / (n - 1), v = static_cast<double>(j) / (n - 1);
      c(i, j) = 1480.0 + 60.0 * std::sin(3.1 * u) * std::cos(2.3 * v);
      q(i, j) = 1000.0 + 40.0 * std::cos(2.7 * u + 1.3 * v);
      d(i, j) = 50.0 * u * v;
      b(i, j) = 2.0 + std::sin(1.7 * v);
    }
  }
  PropertySet props(std::move(c), std::move(q), std::move(d), std::move(b));

  Waveform w;
  w.f0 = 0.02 / dt;  // well below Nyquist at any size
  w.cycles = 2.0;
  w.amplitude = 1e3;
  PulseField pulse(n, n, nt);
  std::vector<double> trace(nt);
  for (int k = 0; k < nt; ++k) trace[k] = w.eval(k * dt);
  pulse.add_source(n / 2, n / 2, std::move(trace));

  Fixture f{grid, std::move(props), std::move(pulse), PmlConfig{0, 0.0},
            ProbeGeometry::linear(1, 1, std::min(4, n - 2), 1)};
  return f;
}

// Measures every point of a series in interleaved rounds, keeping the
// per-point minimum: drift in machine state then hits all sizes alike
// instead of biasing the fitted slope.
std::vector<double> measure_series(const std::vector<std::function<void()>>& fns,
                                   int repetitions) {
  using clock = std::chrono::steady_clock;
  const int n = static_cast<int>(fns.size());
  std::vector<int> inner(n);
  for (int i = 0; i < n; ++i) {
    const auto t0 = clock::now();
    fns[i]();
    const auto t1 = clock::now();
    const double probe = std::max(std::chrono::duration<double>(t1 - t0).count(), 1e-9);
    inner[i] = std::max(1, static_cast<int>(std::ceil(0.05 / probe)));
  }
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  for (int r = 0; r < std::max(repetitions, 2); ++r) {
    for (int i = 0; i < n; ++i) {
      const auto t0 = clock::now();
      for (int k = 0; k < inner[i]; ++k) fns[i]();
      const auto t1 = clock::now();
      best[i] = std::min(best[i],
                         std::chrono::duration<double>(t1 - t0).count() / inner[i]);
    }
  }
  return best;
}

std::function<void()> adjoint_runner(std::shared_ptr<Fixture> f) {
  return [f]() {
    auto [ch, tape] = forward_with_tape(f->props, f->pulse, f->grid, f->pml, f->geom);
    backprop(tape, ch);
  };
}

struct FwiCase {
  Fixture fixture;
  LinearWaveOperator A;
  std::vector<double> u;
  ChannelData res;
  Field d_eff;
};

std::shared_ptr<FwiCase> make_fwi_case(Fixture f) {
  auto c = std::make_shared<FwiCase>();
  c->fixture = std::move(f);
  c->d_eff = effective_attenuation(c->fixture.props.attenuation,
                                   pml_profile(c->fixture.grid, c->fixture.pml));
  c->A = assemble_linear(c->fixture.props.sos, c->fixture.props.density, c->d_eff,
                         c->fixture.grid, size_t(1) << 30);
  const std::vector<double> fv = pulse_to_vector(c->fixture.pulse, c->fixture.grid);
  c->u = solve_wavefield(c->A, fv);
  c->res = ChannelData(c->fixture.geom.nc(), c->fixture.grid.nt, c->fixture.grid.dt);
  for (int j = 0; j < c->fixture.geom.nc(); ++j) {
    const auto [ri, cj] = c->fixture.geom.element_cells[j];
    const size_t cell = static_cast<size_t>(ri) * c->fixture.grid.nz + cj;
    for (int n = 0; n < c->fixture.grid.nt; ++n)
      c->res.at(j, n) = c->u[static_cast<size_t>(n) * c->fixture.grid.cells() + cell];
  }
  return c;
}

std::function<void()> fwi_runner(std::shared_ptr<FwiCase> c) {
  return [c]() {
    fwi_gradient(c->A, c->u, c->res, c->fixture.geom, c->fixture.props.sos,
                 c->fixture.props.density, c->d_eff);
  };
}

}  // namespace

double loglog_slope(const std::vector<ScalingPoint>& pts) {
  if (pts.size() < 3) throw InvalidProperty("loglog_slope: need at least 3 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : pts) {
    const double x = std::log(p.size), y = std::log(p.seconds);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(pts.size());
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::string machine_descriptor() {
  utsname u{};
  uname(&u);
  return std::string(u.sysname) + " " + u.release + " " + u.machine + ", " +
         std::to_string(std::thread::hardware_concurrency()) + " hw threads";
}

ScalingReport bench_adjoint_scaling(const std::vector<int>& grid_sizes, int nt_fixed,
                                    const std::vector<int>& nt_values, int grid_fixed,
                                    int repetitions) {
  ScalingReport rep;
  rep.machine = machine_descriptor();
  std::vector<std::function<void()>> fns;
  for (int n : grid_sizes)
    fns.push_back(adjoint_runner(std::make_shared<Fixture>(make_fixture(n, nt_fixed))));
  std::vector<double> secs = measure_series(fns, repetitions);
  for (size_t i = 0; i < grid_sizes.size(); ++i)
    rep.vs_cells.push_back(
        {static_cast<double>(grid_sizes[i]) * grid_sizes[i], secs[i]});

  fns.clear();
  for (int nt : nt_values)
    fns.push_back(adjoint_runner(std::make_shared<Fixture>(make_fixture(grid_fixed, nt))));
  secs = measure_series(fns, repetitions);
  for (size_t i = 0; i < nt_values.size(); ++i)
    rep.vs_nt.push_back({static_cast<double>(nt_values[i]), secs[i]});

  rep.slope_cells = loglog_slope(rep.vs_cells);
  rep.slope_nt = loglog_slope(rep.vs_nt);
  return rep;
}

ScalingReport bench_fwi_scaling(const std::vector<int>& grid_sizes, int nt_fixed,
                                const std::vector<int>& nt_values, int grid_fixed,
                                int repetitions) {
  ScalingReport rep;
  rep.machine = machine_descriptor();
  std::vector<std::function<void()>> fns;
  for (int n : grid_sizes) fns.push_back(fwi_runner(make_fwi_case(make_fixture(n, nt_fixed))));
  std::vector<double> secs = measure_series(fns, repetitions);
  for (size_t i = 0; i < grid_sizes.size(); ++i)
    rep.vs_cells.push_back(
        {static_cast<double>(grid_sizes[i]) * grid_sizes[i], secs[i]});

  fns.clear();
  for (int nt : nt_values) fns.push_back(fwi_runner(make_fwi_case(make_fixture(grid_fixed, nt))));
  secs = measure_series(fns, repetitions);
  for (size_t i = 0; i < nt_values.size(); ++i)
    rep.vs_nt.push_back({static_cast<double>(nt_values[i]), secs[i]});

  rep.slope_cells = loglog_slope(rep.vs_cells);
  rep.slope_nt = loglog_slope(rep.vs_nt);
  return rep;
}

}  // namespace nwi
