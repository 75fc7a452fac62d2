// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nwi/adjoint.hpp"
#include "nwi/pulse.hpp"
#include "nwi/regularizer.hpp"

namespace nwi {

/// Shared simulation context for the reconstruction loops.
struct PhysicsContext {
  SimulationGrid grid;
  PmlConfig pml;
  ProbeGeometry geom;
  SolverLimits limits;
  size_t tape_budget_bytes = size_t(4096) << 20;
};

enum class OptimizerKind { gd, adam };

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Per-property learning rates; the four unknowns span several orders of
/// magnitude so one shared rate does not work.
struct LearningRates {
  double sos = 1.0;
  double density = 1.0;
  double attenuation = 1e-2;
  double nonlinearity = 1e-3;
};

/// Post-update physical floors; clamps are counted, not silent.
struct PhysicalBounds {
  double sos_floor = 100.0;
  double density_floor = 50.0;
};

struct ClampCounts {
  std::int64_t sos = 0, density = 0, attenuation = 0, nonlinearity = 0;
  std::int64_t total() const { return sos + density + attenuation + nonlinearity; }
};

/// Which maps an update touches.
struct ActiveSet {
  bool sos = false, density = false, attenuation = false, nonlinearity = false;
};

class OptimizerState {
 public:
  OptimizerState(OptimizerKind kind, LearningRates rates, AdamParams adam, int nx, int nz);

  OptimizerKind kind() const { return kind_; }
  const LearningRates& rates() const { return rates_; }

  /// One gradient-based update of the active maps (optionally restricted
  /// to a mask), followed by the physical-bounds clamp.
  ClampCounts step(PropertySet& props, const PropertyGradients& grads, const ActiveSet& active,
                   const Mask* mask, const PhysicalBounds& bounds);

 private:
  struct Moments {
    Field m, v;
    std::int64_t t = 0;
  };
  void update_map(Field& map, const Field& grad, Moments& mom, double rate, const Mask* mask);

  OptimizerKind kind_;
  LearningRates rates_;
  AdamParams adam_;
  Moments m_sos_, m_density_, m_attenuation_, m_nonlinearity_;
};

/// Cells whose density deviates from water by more than the threshold,
/// dilated once with the 4-neighbour structuring element.
Mask tissue_mask(const Field& density_est, double water_density, double threshold);

/// Two-phase staging: sos+density first, then attenuation+nonlinearity
/// restricted to the density-derived tissue mask. With cycle_steps > 0 the
/// two phases alternate with that period (k1_iters of phase 1 per period),
/// so later sos/density updates see the current nonlinearity estimate; the
/// phase is always a pure function of the global step index.
struct StageSchedule {
  int k1_iters = 0;              // phase-1 steps (per period when cycling)
  int cycle_steps = 0;           // 0: single switch at k1_iters
  double mask_threshold = 0.02;  // relative density deviation
  double water_density = 1000.0;
};

struct StopCriteria {
  int max_iterations = 100;
  double plateau_tol = 1e-4;  // relative loss decrease over the window
  int patience = 10;
  double grad_tol_rel = 1e-8;  // vs the initial gradient infinity norm
};

/// Eq.-style total loss: ||P - M||_F + sum_i lambda_i ||Sobel Theta_i||_F.
double total_loss(const PropertySet& props, const ChannelData& measured, const PulseField& pulse,
                  const LossConfig& loss_cfg, const PhysicsContext& ctx);

struct IterationRecord {
  int round = 0;     // outer round (multi-pulse) or 0
  int emission = 0;  // emission index (multi-pulse) or 0
  int step = 0;      // global step index
  double loss = 0.0;
};

struct RunLog {
  std::vector<IterationRecord> iterations;
  ClampCounts clamps;
  std::string stop_reason;
};

struct InversionConfig {
  LossConfig loss;
  OptimizerKind optimizer = OptimizerKind::adam;
  LearningRates rates;
  AdamParams adam;
  PhysicalBounds bounds;
  StageSchedule schedule;
  StopCriteria stop;
  int inner_steps = 5;       // K, Algorithm-2 steps per worker per round
  int outer_iterations = 1;  // rounds of the multi-pulse loop
  int workers = 1;
  // false runs the linear-model arm: the nonlinearity map is never updated
  // (and stays at its init, usually zero), as in the matrix baseline.
  bool estimate_nonlinearity = true;
};

/// Single-pulse reconstruction loop (Algorithm 2 shape): loss_and_gradient
/// then optimizer step under the stage schedule, until a stop criterion
/// fires.
PropertySet nwi_invert(const ChannelData& measured, const PulseField& pulse,
                       const PropertySet& init_props, const InversionConfig& cfg,
                       const PhysicsContext& ctx, RunLog* log = nullptr);

struct Emission {
  PulseField pulse;
  ChannelData measured;
  std::uint64_t noise_seed = 0;
};

/// Multi-insonification loop: every round the shared estimate is sent to
/// one worker per emission, each runs K steps, and the returned estimates
/// are averaged elementwise (fixed emission order). Bit-identical for any
/// worker count.
PropertySet multi_pulse_invert(const std::vector<Emission>& dataset,
                               const PropertySet& init_props, const InversionConfig& cfg,
                               const PhysicsContext& ctx, RunLog* log = nullptr);

}  // namespace nwi
