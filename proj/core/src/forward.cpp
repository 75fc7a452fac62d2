// SPDX-License-Identifier: Apache-2.0
#include "nwi/forward.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace nwi {

StepCoefficients::StepCoefficients(const PropertySet& props, const Field& d_eff,
                                   const SimulationGrid& grid, const SolverLimits& limits)
    : cq(grid.nx, grid.nz), c2(grid.nx, grid.nz), two_k(grid.nx, grid.nz),
      g2c(grid.nx, grid.nz), g3c(grid.nx, grid.nz), px(grid.nx, grid.nz), pz(grid.nx, grid.nz),
      grid_(grid), limits_(limits) {
  if (props.nx() != grid.nx || props.nz() != grid.nz)
    throw ShapeMismatch("step coefficients: property maps do not match grid");
  require_same_shape(props.sos, d_eff, "step coefficients");

  inv_dt2 = 1.0 / (grid.dt * grid.dt);
  g1_floor = limits.g1_floor_scale * inv_dt2;

  Field invq(grid.nx, grid.nz);
  for (size_t k = 0; k < cq.size(); ++k) {
    const double c = props.sos[k], q = props.density[k], d = d_eff[k];
    c2[k] = c * c;
    cq[k] = c * c * q;
    two_k[k] = 2.0 * props.nonlinearity[k] / cq[k];
    g2c[k] = d * d + 2.0 * d / grid.dt;
    g3c[k] = 2.0 * d / grid.dt;
    invq[k] = 1.0 / q;
  }
  grad_into(invq, grid.dx, px, pz);
}

void westervelt_step_into(const StepCoefficients& co, const Field& u_prev, const Field& u_prev2,
                          const Field& f_now, int step_index, Field& out, Field* g1_out,
                          Field& gx, Field& gz, Field& lap) {
  grad_into(u_prev, co.grid().dx, gx, gz);
  laplacian_into(u_prev, co.grid().dx, lap);

  const double cap = co.limits().field_cap;
  for (size_t k = 0; k < out.size(); ++k) {
    const double u1 = u_prev[k], u2 = u_prev2[k];
    const double g1 = co.inv_dt2 * (1.0 + co.two_k[k] * u1);
    if (!(g1 > co.g1_floor))
      throw NonlinearityBlowup(step_index,
                               "westervelt_step: G1 fell below floor at step " +
                                   std::to_string(step_index) +
                                   " (nonlinear term overwhelmed the linear one)");
    const double g2 = 2.0 * g1 - co.g2c[k];
    const double g3 = -g1 + co.g3c[k];
    const double g4 = -co.inv_dt2 * co.two_k[k];
    const double w = u1 - u2;
    const double coupling = co.px[k] * gx[k] + co.pz[k] * gz[k];
    const double num = g2 * u1 + g3 * u2 + g4 * w * w + co.cq[k] * coupling +
                       co.c2[k] * lap[k] + f_now[k];
    const double un = num / g1;
    if (!(std::fabs(un) <= cap))
      throw FieldDiverged(step_index, "westervelt_step: |U| exceeded " + std::to_string(cap) +
                                          " Pa at step " + std::to_string(step_index));
    out[k] = un;
    if (g1_out) (*g1_out)[k] = g1;
  }
}

Field westervelt_step(const Field& u_prev, const Field& u_prev2, const PropertySet& props,
                      const Field& d_eff, const Field& f_now, const SimulationGrid& grid,
                      const SolverLimits& limits) {
  StepCoefficients co(props, d_eff, grid, limits);
  Field out(grid.nx, grid.nz), gx(grid.nx, grid.nz), gz(grid.nx, grid.nz),
      lap(grid.nx, grid.nz);
  westervelt_step_into(co, u_prev, u_prev2, f_now, 2, out, nullptr, gx, gz, lap);
  return out;
}

void PulseField::add_source(int i, int j, std::vector<double> trace) {
  if (static_cast<int>(trace.size()) != nt_)
    throw ShapeMismatch("pulse: trace length must equal nt");
  if (i < 0 || i >= nx_ || j < 0 || j >= nz_)
    throw IndexOutOfGrid("pulse: source cell outside grid");
  for (const auto& s : sources_)
    if (s.i == i && s.j == j) throw InvalidGeometry("pulse: duplicate source cell");
  sources_.push_back({i, j, std::move(trace)});
}

void PulseField::check_grid(const SimulationGrid& grid) const {
  if (nx_ != grid.nx || nz_ != grid.nz || nt_ != grid.nt)
    throw ShapeMismatch("pulse: shape does not match grid");
}

namespace {

// Shared stepping loop; sink(n, slice) observes every slice 0..nt-1.
template <class Sink>
void run_simulation(const PropertySet& props, const PulseField& pulse, const SimulationGrid& grid,
                    const PmlConfig& pml, const SolverLimits& limits, bool record_g1, Sink&& sink) {
  check_cfl(props, grid);
  pulse.check_grid(grid);

  const Field d_eff = effective_attenuation(props.attenuation, pml_profile(grid, pml));
  const StepCoefficients co(props, d_eff, grid, limits);

  Field u_prev2(grid.nx, grid.nz), u_prev(grid.nx, grid.nz), u_next(grid.nx, grid.nz);
  Field gx(grid.nx, grid.nz), gz(grid.nx, grid.nz), lap(grid.nx, grid.nz);
  Field fbuf(grid.nx, grid.nz, 0.0);
  Field g1buf(grid.nx, grid.nz);

  sink(0, u_prev2, nullptr);
  sink(1, u_prev, nullptr);
  for (int n = 2; n < grid.nt; ++n) {
    for (const auto& s : pulse.sources()) fbuf(s.i, s.j) = s.trace[n];
    westervelt_step_into(co, u_prev, u_prev2, fbuf, n, u_next,
                         record_g1 ? &g1buf : nullptr, gx, gz, lap);
    sink(n, u_next, record_g1 ? &g1buf : nullptr);
    std::swap(u_prev2, u_prev);
    std::swap(u_prev, u_next);
  }
}

}  // namespace

Wavefield simulate_full(const PropertySet& props, const PulseField& pulse,
                        const SimulationGrid& grid, const PmlConfig& pml,
                        const SolverLimits& limits) {
  Wavefield w(grid);
  run_simulation(props, pulse, grid, pml, limits, false,
                 [&](int n, const Field& s, const Field*) {
                   std::copy(s.begin(), s.end(), w.slice(n));
                 });
  return w;
}

ChannelData simulate_channels(const PropertySet& props, const PulseField& pulse,
                              const SimulationGrid& grid, const PmlConfig& pml,
                              const ProbeGeometry& geom, const SolverLimits& limits) {
  geom.validate_inside(grid.nx, grid.nz);
  ChannelData ch(geom.nc(), grid.nt, grid.dt);
  run_simulation(props, pulse, grid, pml, limits, false,
                 [&](int n, const Field& s, const Field*) {
                   for (int j = 0; j < geom.nc(); ++j) {
                     const auto [r, c] = geom.element_cells[j];
                     ch.at(j, n) = s(r, c);
                   }
                 });
  return ch;
}

double second_harmonic_ratio(const ChannelData& ch, double f0) {
  if (!(f0 > 0.0)) throw NyquistViolation("second_harmonic_ratio: f0 must be > 0");
  const double nyquist = 0.5 / ch.dt;
  if (!(2.0 * f0 < nyquist))
    throw NyquistViolation("second_harmonic_ratio: 2*f0 = " + std::to_string(2.0 * f0) +
                           " Hz is not below Nyquist " + std::to_string(nyquist) + " Hz");

  const int nt = ch.nt;
  const double df = 1.0 / (nt * ch.dt);
  const int kmax = nt / 2;
  auto band = [&](double fc) {
    const int lo = static_cast<int>(std::ceil(0.9 * fc / df));
    const int hi = std::min(kmax, static_cast<int>(std::floor(1.1 * fc / df)));
    return std::pair<int, int>{std::max(lo, 1), hi};
  };
  const auto [lo1, hi1] = band(f0);
  const auto [lo2, hi2] = band(2.0 * f0);
  if (lo1 > hi1 || lo2 > hi2)
    throw NyquistViolation("second_harmonic_ratio: nt too small to resolve the bands");

  auto band_power = [&](const double* x, int lo, int hi) {
    double p = 0.0;
    for (int k = lo; k <= hi; ++k) {
      double re = 0.0, im = 0.0;
      const double w = 2.0 * std::numbers::pi * k / nt;
      for (int n = 0; n < nt; ++n) {
        re += x[n] * std::cos(w * n);
        im -= x[n] * std::sin(w * n);
      }
      p += re * re + im * im;
    }
    return p;
  };

  double sum = 0.0;
  int used = 0;
  for (int c = 0; c < ch.nc; ++c) {
    const double* x = ch.samples.data() + static_cast<size_t>(c) * nt;
    const double p1 = band_power(x, lo1, hi1);
    if (p1 <= 0.0) continue;
    sum += band_power(x, lo2, hi2) / p1;
    ++used;
  }
  return used == 0 ? 0.0 : sum / used;
}

}  // namespace nwi
