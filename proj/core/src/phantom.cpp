// SPDX-License-Identifier: Apache-2.0
#include "nwi/phantom.hpp"

#include <cmath>
#include <string>

#include "nwi/io.hpp"

namespace nwi {

namespace {

bool contains(const Inclusion& inc, double x, double z) {
  switch (inc.shape) {
    case Inclusion::Shape::ellipse: {
      const double rx = (x - inc.x0) / inc.ax;
      const double rz = (z - inc.z0) / inc.az;
      return rx * rx + rz * rz <= 1.0;
    }
    case Inclusion::Shape::rectangle:
      return x >= inc.x0 && x <= inc.x0 + inc.ax && z >= inc.z0 && z <= inc.z0 + inc.az;
  }
  return false;
}

void validate_inclusion(const Inclusion& inc, const PhantomSpec& spec) {
  double lox, hix, loz, hiz;
  if (inc.shape == Inclusion::Shape::ellipse) {
    if (!(inc.ax > 0.0 && inc.az > 0.0))
      throw InvalidGeometry("phantom: ellipse semi-axes must be > 0");
    lox = inc.x0 - inc.ax;
    hix = inc.x0 + inc.ax;
    loz = inc.z0 - inc.az;
    hiz = inc.z0 + inc.az;
  } else {
    if (!(inc.ax > 0.0 && inc.az > 0.0))
      throw InvalidGeometry("phantom: rectangle size must be > 0");
    lox = inc.x0;
    hix = inc.x0 + inc.ax;
    loz = inc.z0;
    hiz = inc.z0 + inc.az;
  }
  if (lox < 0.0 || loz < 0.0 || hix > spec.extent_x || hiz > spec.extent_z)
    throw InvalidGeometry("phantom: inclusion outside the extent");
}

}  // namespace

PropertySet make_phantom(const PhantomSpec& spec, const SimulationGrid& grid) {
  const double tol = 1e-9;
  if (std::fabs(spec.extent_x - grid.nx * grid.dx) > tol * spec.extent_x ||
      std::fabs(spec.extent_z - grid.nz * grid.dx) > tol * spec.extent_z)
    throw InvalidGeometry("phantom: extent must equal nx*dx by nz*dx");
  for (const auto& inc : spec.inclusions) validate_inclusion(inc, spec);

  Field maps[4];
  for (int m = 0; m < 4; ++m) maps[m] = Field(grid.nx, grid.nz, spec.background[m]);

  for (int i = 0; i < grid.nx; ++i) {
    const double x = (i + 0.5) * grid.dx;
    for (int j = 0; j < grid.nz; ++j) {
      const double z = (j + 0.5) * grid.dx;
      // Last inclusion containing the cell centre wins.
      for (auto it = spec.inclusions.rbegin(); it != spec.inclusions.rend(); ++it) {
        if (contains(*it, x, z)) {
          for (int m = 0; m < 4; ++m) maps[m](i, j) = it->properties[m];
          break;
        }
      }
    }
  }
  return PropertySet(std::move(maps[0]), std::move(maps[1]), std::move(maps[2]),
                     std::move(maps[3]));
}

double nrmse(const Field& est, const Field& truth, const PropertyBounds& bounds) {
  require_same_shape(est, truth, "nrmse");
  if (!(bounds.max > bounds.min)) throw DegenerateBounds("nrmse: bounds.max must exceed min");
  double sq = 0.0;
  for (size_t k = 0; k < est.size(); ++k) {
    const double d = est[k] - truth[k];
    sq += d * d;
  }
  return std::sqrt(sq / static_cast<double>(est.size())) / (bounds.max - bounds.min);
}

Field crop_ring(const Field& f, int width) {
  if (width <= 0) return f;
  if (f.nx() - 2 * width < 1 || f.nz() - 2 * width < 1)
    throw GridTooSmall("crop_ring: ring wider than the map");
  Field out(f.nx() - 2 * width, f.nz() - 2 * width);
  for (int i = 0; i < out.nx(); ++i)
    for (int j = 0; j < out.nz(); ++j) out(i, j) = f(i + width, j + width);
  return out;
}

void export_map(const Field& map, const PropertyBounds& bounds, const std::string& path,
                MapFormat format) {
  switch (format) {
    case MapFormat::csv:
      write_csv_map(path, map);
      return;
    case MapFormat::pgm:
      write_pgm16(path, map, bounds);
      return;
    case MapFormat::nwimap:
      write_nwimap(path, map, MapKind::generic);
      return;
  }
  throw IoError("export_map: unknown format");
}

}  // namespace nwi
