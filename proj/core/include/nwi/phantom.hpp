// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <vector>

#include "nwi/grid.hpp"

namespace nwi {

/// Property 4-tuple in map order: sos, density, attenuation, nonlinearity.
using PropertyTuple = std::array<double, 4>;

struct Inclusion {
  enum class Shape { ellipse, rectangle };
  Shape shape = Shape::ellipse;
  // ellipse: centre + semi-axes; rectangle: corner + size. Metres.
  double x0 = 0, z0 = 0, ax = 0, az = 0;
  PropertyTuple properties{};
};

/// Water-like background with piecewise-constant inclusions; the last
/// inclusion containing a cell centre wins, boundaries count as inside.
struct PhantomSpec {
  double extent_x = 0, extent_z = 0;  // metres
  PropertyTuple background{};
  std::vector<Inclusion> inclusions;
};

PropertySet make_phantom(const PhantomSpec& spec, const SimulationGrid& grid);

/// Known value range used by the NRMSE normalization.
struct PropertyBounds {
  double min = 0, max = 0;
};

struct BoundsSet {
  PropertyBounds sos{1300, 1700};
  PropertyBounds density{800, 1200};
  PropertyBounds attenuation{0, 2e4};
  PropertyBounds nonlinearity{0, 8};
};

/// sqrt(||est - truth||_F^2 / (nx nz)) / (max - min).
double nrmse(const Field& est, const Field& truth, const PropertyBounds& bounds);

/// Crop a ring of `width` cells off every edge (PML exclusion helper).
Field crop_ring(const Field& f, int width);

enum class MapFormat { csv, pgm, nwimap };

void export_map(const Field& map, const PropertyBounds& bounds, const std::string& path,
                MapFormat format);

}  // namespace nwi
