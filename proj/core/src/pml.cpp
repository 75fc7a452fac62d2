// SPDX-License-Identifier: Apache-2.0
#include "nwi/pml.hpp"

#include <algorithm>
#include <cmath>

namespace nwi {

Field pml_profile(const SimulationGrid& grid, const PmlConfig& pml) {
  if (pml.width_cells < 0 || pml.d_max < 0.0)
    throw InvalidProperty("pml: width_cells and d_max must be >= 0");
  if (2 * pml.width_cells >= std::min(grid.nx, grid.nz))
    throw PmlTooWide("pml: 2*width_cells must be < min(nx, nz)");

  Field out(grid.nx, grid.nz, 0.0);
  const int w = pml.width_cells;
  if (w == 0 || pml.d_max == 0.0) return out;

  auto depth = [w](int idx, int n) {
    int l = 0;
    if (idx < w) l = w - idx;
    if (idx > n - 1 - w) l = std::max(l, idx - (n - 1 - w));
    return l;
  };
  for (int i = 0; i < grid.nx; ++i) {
    const int li = depth(i, grid.nx);
    for (int j = 0; j < grid.nz; ++j) {
      const int l = std::max(li, depth(j, grid.nz));
      if (l > 0) {
        const double r = static_cast<double>(l) / w;
        out(i, j) = pml.d_max * r * r;
      }
    }
  }
  return out;
}

Field effective_attenuation(const Field& attenuation, const Field& pml_map) {
  require_same_shape(attenuation, pml_map, "effective_attenuation");
  Field out(attenuation.nx(), attenuation.nz());
  for (size_t k = 0; k < out.size(); ++k) out[k] = attenuation[k] + pml_map[k];
  return out;
}

double suggested_pml_dmax(double c, int width_cells, double dx, double dt, double target_db) {
  if (width_cells <= 0) return 0.0;
  // Two-way amplitude loss through the quadratic ramp:
  // exp(-(2/c) * integral d_max (l/L)^2 dl) = exp(-2 d_max L / (3c)).
  const double layer = width_cells * dx;
  const double wanted = 3.0 * c * target_db * std::log(10.0) / (40.0 * layer);
  return std::min(wanted, 0.25 / dt);
}

}  // namespace nwi
