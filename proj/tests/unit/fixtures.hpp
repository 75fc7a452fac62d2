// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

#include "nwi/acquisition.hpp"
#include "nwi/adjoint.hpp"
#include "nwi/inversion.hpp"

namespace nwi::testfix {

/// Smooth random map in [lo, hi]: white noise pushed through a few Jacobi
/// averaging passes.
inline Field smooth_random(int nx, int nz, double lo, double hi, std::uint64_t seed,
                           int passes = 4) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  Field f(nx, nz);
  for (auto& v : f) v = dist(eng);
  Field tmp(nx, nz);
  for (int p = 0; p < passes; ++p) {
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < nz; ++j) {
        const int im = std::max(i - 1, 0), ip = std::min(i + 1, nx - 1);
        const int jm = std::max(j - 1, 0), jp = std::min(j + 1, nz - 1);
        tmp(i, j) = 0.2 * (f(i, j) + f(im, j) + f(ip, j) + f(i, jm) + f(i, jp));
      }
    std::swap(f, tmp);
  }
  double mn = f.min(), mx = f.max();
  if (mx == mn) mx = mn + 1.0;
  for (auto& v : f) v = lo + (hi - lo) * (v - mn) / (mx - mn);
  return f;
}

struct DeskProblem {
  SimulationGrid grid{16, 16, 60, 5e-4, 1.25e-7};
  PmlConfig pml{3, 0.0};
  ProbeGeometry geom = ProbeGeometry::linear(3, 4, 8, 1);
  SolverLimits limits;
  PropertySet props;
  PropertySet truth;
  PulseField pulse;
  ChannelData measured;
  LossConfig loss;
};

/// The gradcheck scenario: heterogeneous smooth properties, one focused
/// pulse, measured data from a different (truth) medium, all four
/// regularizers on.
inline DeskProblem make_desk_problem(std::uint64_t seed, int nx = 16, int nz = 16, int nt = 60) {
  DeskProblem d;
  d.grid = SimulationGrid(nx, nz, nt, 5e-4, 1.25e-7);
  d.pml = PmlConfig{3, suggested_pml_dmax(1480.0, 3, d.grid.dx, d.grid.dt)};
  d.geom = ProbeGeometry::linear(3, nz / 4, nz / 2, 1);

  d.props = PropertySet(smooth_random(nx, nz, 1430, 1560, seed),
                        smooth_random(nx, nz, 950, 1080, seed + 1),
                        smooth_random(nx, nz, 100, 2000, seed + 2),
                        smooth_random(nx, nz, 1.0, 6.0, seed + 3));
  d.truth = PropertySet(smooth_random(nx, nz, 1440, 1545, seed + 10),
                        smooth_random(nx, nz, 960, 1070, seed + 11),
                        smooth_random(nx, nz, 200, 1800, seed + 12),
                        smooth_random(nx, nz, 0.5, 5.0, seed + 13));

  EmissionPlan plan;
  plan.n_emissions = 1;
  plan.aperture_elements = d.geom.nc();
  plan.stride_elements = 0;
  plan.waveform.f0 = 3e5;
  plan.waveform.cycles = 3.0;
  plan.waveform.amplitude = 2e19;
  plan.focus_depth = 3e-3;
  plan.assumed_sos = 1480.0;
  d.pulse = synthesize_focused(plan, d.geom, d.grid, 0);

  d.measured = simulate_channels(d.truth, d.pulse, d.grid, d.pml, d.geom, d.limits);

  d.loss.lambda_sos = 1e-2;
  d.loss.lambda_density = 1e-2;
  d.loss.lambda_attenuation = 1e-3;
  d.loss.lambda_nonlinearity = 1e-1;
  return d;
}

enum class Prop { sos, density, attenuation, nonlinearity };

inline Field& map_of(PropertySet& p, Prop which) {
  switch (which) {
    case Prop::sos: return p.sos;
    case Prop::density: return p.density;
    case Prop::attenuation: return p.attenuation;
    default: return p.nonlinearity;
  }
}

inline const Field& grad_of(const PropertyGradients& g, Prop which) {
  switch (which) {
    case Prop::sos: return g.d_sos;
    case Prop::density: return g.d_density;
    case Prop::attenuation: return g.d_attenuation;
    default: return g.d_nonlinearity;
  }
}

/// Central finite difference (fourth order) of the Eq.-18-style total
/// loss w.r.t. one property cell, using the non-tape simulation path as
/// the oracle.
inline double fd_loss_derivative(const DeskProblem& d, Prop which, int i, int j, double h) {
  PhysicsContext ctx;
  ctx.grid = d.grid;
  ctx.pml = d.pml;
  ctx.geom = d.geom;
  ctx.limits = d.limits;
  auto at = [&](double offset) {
    PropertySet p = d.props;
    map_of(p, which)(i, j) += offset;
    return total_loss(p, d.measured, d.pulse, d.loss, ctx);
  };
  return (-at(2 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2 * h)) / (12.0 * h);
}

inline double rel_err(double a, double b) {
  const double denom = std::max({std::fabs(a), std::fabs(b), 1e-300});
  return std::fabs(a - b) / denom;
}

}  // namespace nwi::testfix
