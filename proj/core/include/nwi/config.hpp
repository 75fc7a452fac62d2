// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "nwi/acquisition.hpp"
#include "nwi/fwi.hpp"
#include "nwi/inversion.hpp"
#include "nwi/phantom.hpp"

namespace nwi {

/// Parsed and validated run configuration. Every referenced value passes
/// its module's preconditions at load time; violations report the dotted
/// key path.
struct RunConfig {
  // grid
  int nx = 64, nz = 64, nt = 400;
  double dx = 5e-4, dt = 1e-7;

  // pml ("auto" d_max resolves against plan.assumed_sos)
  int pml_width = 8;
  double pml_d_max = -1.0;  // < 0 means auto

  // probe
  int probe_nc = 32;
  int probe_row = -1;        // -1: first row inside the PML
  int probe_pitch_cells = 1;
  int probe_first_col = -1;  // -1: centred

  EmissionPlan plan;

  // noise
  double snr = std::numeric_limits<double>::infinity();  // linear power ratio
  std::uint64_t seed = 1;

  LossConfig loss;
  OptimizerKind optimizer = OptimizerKind::adam;
  LearningRates rates;
  AdamParams adam;
  PhysicalBounds phys_bounds;

  double k1_fraction = 0.6;
  int schedule_cycle = 0;  // 0: single phase switch; >0: alternate phases
  double mask_threshold = 0.02;
  double water_density = 1000.0;
  int inner_steps = 5;
  int outer_iterations = 10;
  int workers = 1;
  bool estimate_nonlinearity = true;
  StopCriteria stop;

  PhantomSpec phantom;
  BoundsSet bounds;

  SolverLimits limits;
  std::uint64_t tape_budget_mb = 4096;
  std::uint64_t fwi_max_unknowns = 200000;
  std::string checkpointing = "none";  // recompute-from-checkpoints is a stub

  // derived helpers
  SimulationGrid make_grid() const;
  PmlConfig make_pml() const;
  ProbeGeometry make_probe() const;
  PhysicsContext make_context() const;
  InversionConfig make_inversion_config(int total_steps) const;

  nlohmann::json to_json() const;
};

RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

/// Named property presets used by the phantom section.
PropertyTuple tissue_preset(const std::string& name);

}  // namespace nwi
