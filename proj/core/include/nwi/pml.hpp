// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nwi/field.hpp"
#include "nwi/grid.hpp"

namespace nwi {

/// Absorbing layer: quadratic attenuation ramp over width_cells, peaking
/// at d_max on the outermost cells.
struct PmlConfig {
  int width_cells = 0;
  double d_max = 0.0;
};

/// Artificial attenuation map: d_max * (l / L_P)^2 where l is the depth
/// into the layer measured from the inner interface toward the grid edge;
/// corners take the max over the two axes; interior cells are 0.
Field pml_profile(const SimulationGrid& grid, const PmlConfig& pml);

/// D_eff = D + D_pml, elementwise.
Field effective_attenuation(const Field& attenuation, const Field& pml_map);

/// Peak attenuation such that a plane wave at speed c crossing the layer
/// twice loses target_db decibels, capped at 0.25/dt: the explicit
/// damping update is only stable while d_max * dt stays well below 1.
double suggested_pml_dmax(double c, int width_cells, double dx, double dt,
                          double target_db = 60.0);

}  // namespace nwi
