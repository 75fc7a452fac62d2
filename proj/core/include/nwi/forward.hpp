// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include "nwi/field.hpp"
#include "nwi/grid.hpp"
#include "nwi/pml.hpp"
#include "nwi/pulse.hpp"
#include "nwi/stencils.hpp"

namespace nwi {

/// Guards on the time stepping.
struct SolverLimits {
  double field_cap = 1e12;       // Pa; |U| beyond this is divergence
  double g1_floor_scale = 1e-3;  // G1 <= scale/dt^2 is a nonlinearity blowup
};

/// Precomputed pieces of the recurrence coefficients. G1 depends on
/// U[n-1] and is formed inside the step; everything else is fixed.
///
///   G1 = (1/dt^2) (1 + two_k .* U[n-1])      two_k = 2B / (C^2 Q)
///   G2 = 2 G1 - g2c                          g2c   = D^2 + (2/dt) D
///   G3 = -G1 + g3c                           g3c   = (2/dt) D
///   G4 = -(1/dt^2) two_k
///
/// with D taken as the effective attenuation (physical + PML). The spatial
/// terms carry coefficient cq = C^2 Q on the density coupling and c2 = C^2
/// on the Laplacian.
class StepCoefficients {
 public:
  StepCoefficients(const PropertySet& props, const Field& d_eff, const SimulationGrid& grid,
                   const SolverLimits& limits = {});

  const SimulationGrid& grid() const { return grid_; }
  const SolverLimits& limits() const { return limits_; }

  Field cq, c2, two_k, g2c, g3c, px, pz;  // px, pz = grad(1/Q)
  double inv_dt2 = 0.0;
  double g1_floor = 0.0;

 private:
  SimulationGrid grid_;
  SolverLimits limits_;
};

/// One application of the recurrence: writes U[n] into out given U[n-1],
/// U[n-2] and the dense forcing slice F[n]. Optionally records the G1 map.
/// Scratch fields gx, gz, lap must match the grid shape.
void westervelt_step_into(const StepCoefficients& co, const Field& u_prev, const Field& u_prev2,
                          const Field& f_now, int step_index, Field& out, Field* g1_out,
                          Field& gx, Field& gz, Field& lap);

/// Convenience single-step form assembling coefficients on the fly.
Field westervelt_step(const Field& u_prev, const Field& u_prev2, const PropertySet& props,
                      const Field& d_eff, const Field& f_now, const SimulationGrid& grid,
                      const SolverLimits& limits = {});

/// Full-history simulation: U[0] = U[1] = 0, steps n = 2..nt-1.
/// F[0] and F[1] are never read.
Wavefield simulate_full(const PropertySet& props, const PulseField& pulse,
                        const SimulationGrid& grid, const PmlConfig& pml,
                        const SolverLimits& limits = {});

/// Channel-data-only simulation with a two-slice ring buffer.
ChannelData simulate_channels(const PropertySet& props, const PulseField& pulse,
                              const SimulationGrid& grid, const PmlConfig& pml,
                              const ProbeGeometry& geom, const SolverLimits& limits = {});

/// Power in a +-10% band around 2*f0 relative to the band around f0,
/// averaged over channels (rectangular-window DFT).
double second_harmonic_ratio(const ChannelData& ch, double f0);

}  // namespace nwi
