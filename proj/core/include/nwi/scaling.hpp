// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "nwi/field.hpp"

namespace nwi {

struct ScalingPoint {
  double size = 0;     // cell count or nt
  double seconds = 0;  // median wall time
};

/// Measured wall times against problem size with fitted log-log slopes.
struct ScalingReport {
  std::vector<ScalingPoint> vs_cells;
  std::vector<ScalingPoint> vs_nt;
  double slope_cells = 0.0;
  double slope_nt = 0.0;
  std::string machine;
};

/// Least-squares slope of log(seconds) against log(size); needs >= 3 points.
double loglog_slope(const std::vector<ScalingPoint>& pts);

/// Times forward_with_tape + backprop on square grids (fixed nt) and over
/// nt (fixed grid).
ScalingReport bench_adjoint_scaling(const std::vector<int>& grid_sizes, int nt_fixed,
                                    const std::vector<int>& nt_values, int grid_fixed,
                                    int repetitions = 3);

/// Times the per-cell fwi_gradient on square grids (fixed nt) and over nt
/// (fixed grid). Tiny sizes only.
ScalingReport bench_fwi_scaling(const std::vector<int>& grid_sizes, int nt_fixed,
                                const std::vector<int>& nt_values, int grid_fixed,
                                int repetitions = 3);

std::string machine_descriptor();

}  // namespace nwi
