// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "nwi/forward.hpp"

namespace nwi {

/// Gradients of the loss with respect to the four property maps.
struct PropertyGradients {
  Field d_sos;
  Field d_density;
  Field d_attenuation;
  Field d_nonlinearity;

  PropertyGradients() = default;
  PropertyGradients(int nx, int nz)
      : d_sos(nx, nz), d_density(nx, nz), d_attenuation(nx, nz), d_nonlinearity(nx, nz) {}

  bool all_finite() const {
    return d_sos.all_finite() && d_density.all_finite() && d_attenuation.all_finite() &&
           d_nonlinearity.all_finite();
  }
};

/// Everything the reverse pass needs: the full pressure history, the
/// per-step G1 maps, and the inputs that produced them. Immutable once
/// the forward pass completes.
class Tape {
 public:
  Tape() = default;

  const SimulationGrid& grid() const { return grid_; }
  const PropertySet& props() const { return props_; }
  const Field& d_eff() const { return d_eff_; }
  const ProbeGeometry& geom() const { return geom_; }
  const SolverLimits& limits() const { return limits_; }

  const Field& u(int n) const { return u_[n]; }
  const Field& g1(int n) const { return g1_[n]; }  // valid for n >= 2
  int nt() const { return grid_.nt; }

  static size_t bytes_needed(const SimulationGrid& grid) {
    return grid.cells() * sizeof(double) * (2 * static_cast<size_t>(grid.nt));
  }

 private:
  friend std::pair<ChannelData, Tape> forward_with_tape(const PropertySet&, const PulseField&,
                                                        const SimulationGrid&, const PmlConfig&,
                                                        const ProbeGeometry&, const SolverLimits&,
                                                        size_t);
  SimulationGrid grid_;
  PropertySet props_;
  Field d_eff_;
  ProbeGeometry geom_;
  SolverLimits limits_;
  std::vector<Field> u_;
  std::vector<Field> g1_;
};

/// Forward pass recording the tape. Channel output is the same
/// computation as simulate_channels. Throws TapeMemoryExceeded when the
/// history would not fit in tape_budget_bytes.
std::pair<ChannelData, Tape> forward_with_tape(const PropertySet& props, const PulseField& pulse,
                                               const SimulationGrid& grid, const PmlConfig& pml,
                                               const ProbeGeometry& geom,
                                               const SolverLimits& limits = {},
                                               size_t tape_budget_bytes = size_t(4096) << 20);

/// Reverse sweep through the recurrence. With data_residual = P - M this
/// returns the exact gradients of (1/2) ||P - M||_F^2 with respect to all
/// four property maps (attenuation gradient taken w.r.t. the physical D;
/// the PML offset is additive so the two coincide).
PropertyGradients backprop(const Tape& tape, const ChannelData& data_residual);

/// Per-property regularization weights of the total loss.
struct LossConfig {
  double lambda_sos = 0.0;
  double lambda_density = 0.0;
  double lambda_attenuation = 0.0;
  double lambda_nonlinearity = 0.0;
};

/// Total loss ||P - M||_F + sum_i lambda_i ||Sobel Theta_i||_F and its
/// exact gradient.
std::pair<double, PropertyGradients> loss_and_gradient(
    const PropertySet& props, const PulseField& pulse, const ChannelData& measured,
    const LossConfig& loss_cfg, const SimulationGrid& grid, const PmlConfig& pml,
    const ProbeGeometry& geom, const SolverLimits& limits = {},
    size_t tape_budget_bytes = size_t(4096) << 20);

}  // namespace nwi
