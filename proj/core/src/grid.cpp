// SPDX-License-Identifier: Apache-2.0
#include "nwi/grid.hpp"

#include <cmath>
#include <set>
#include <string>

namespace nwi {

SimulationGrid::SimulationGrid(int nx, int nz, int nt, double dx, double dt)
    : nx(nx), nz(nz), nt(nt), dx(dx), dt(dt) {
  if (nx < 3 || nz < 3) throw GridTooSmall("grid: nx and nz must be >= 3");
  if (nt < 3) throw GridTooSmall("grid: nt must be >= 3");
  if (!(dx > 0.0) || !std::isfinite(dx)) throw InvalidProperty("grid: dx must be > 0");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidProperty("grid: dt must be > 0");
}

PropertySet::PropertySet(Field c, Field q, Field d, Field b)
    : sos(std::move(c)), density(std::move(q)), attenuation(std::move(d)),
      nonlinearity(std::move(b)) {
  require_same_shape(sos, density, "PropertySet");
  require_same_shape(sos, attenuation, "PropertySet");
  require_same_shape(sos, nonlinearity, "PropertySet");
  for (size_t k = 0; k < sos.size(); ++k) {
    if (!(sos[k] > 0.0) || !std::isfinite(sos[k]))
      throw InvalidProperty("PropertySet: sos must be finite and > 0 everywhere");
    if (!(density[k] > 0.0) || !std::isfinite(density[k]))
      throw InvalidProperty("PropertySet: density must be finite and > 0 everywhere");
    if (!(attenuation[k] >= 0.0) || !std::isfinite(attenuation[k]))
      throw InvalidProperty("PropertySet: attenuation must be finite and >= 0");
    if (!(nonlinearity[k] >= 0.0) || !std::isfinite(nonlinearity[k]))
      throw InvalidProperty("PropertySet: nonlinearity must be finite and >= 0");
  }
}

PropertySet PropertySet::uniform(int nx, int nz, double c, double q, double d, double b) {
  return PropertySet(Field(nx, nz, c), Field(nx, nz, q), Field(nx, nz, d), Field(nx, nz, b));
}

ProbeGeometry::ProbeGeometry(std::vector<std::pair<int, int>> cells, int pitch)
    : element_cells(std::move(cells)), pitch_cells(pitch) {
  if (element_cells.empty()) throw InvalidGeometry("probe: needs at least one element");
  const int row = element_cells.front().first;
  int prev_col = element_cells.front().second - 1;
  for (const auto& [r, c] : element_cells) {
    if (r != row) throw InvalidGeometry("probe: all elements must lie on one row");
    if (c <= prev_col) throw InvalidGeometry("probe: element columns must strictly increase");
    prev_col = c;
  }
}

ProbeGeometry ProbeGeometry::linear(int row, int first_col, int nc, int pitch_cells) {
  if (nc < 1) throw InvalidGeometry("probe: nc must be >= 1");
  if (pitch_cells < 1) throw InvalidGeometry("probe: pitch_cells must be >= 1");
  std::vector<std::pair<int, int>> cells;
  cells.reserve(nc);
  for (int j = 0; j < nc; ++j) cells.emplace_back(row, first_col + j * pitch_cells);
  return ProbeGeometry(std::move(cells), pitch_cells);
}

void ProbeGeometry::validate_inside(int nx, int nz) const {
  for (const auto& [r, c] : element_cells)
    if (r < 0 || r >= nx || c < 0 || c >= nz)
      throw IndexOutOfGrid("probe: element (" + std::to_string(r) + "," + std::to_string(c) +
                           ") outside " + std::to_string(nx) + "x" + std::to_string(nz) + " grid");
}

double courant_number(const PropertySet& props, const SimulationGrid& grid) {
  return props.sos.max() * grid.dt / grid.dx;
}

void check_cfl(const PropertySet& props, const SimulationGrid& grid) {
  const double cr = courant_number(props, grid);
  if (cr > 1.0)
    throw CflViolation(cr, "CFL violated: C_r = " + std::to_string(cr) +
                               " > 1; reduce dt to at most dx/max(sos) = " +
                               std::to_string(grid.dx / props.sos.max()) + " s");
}

ChannelData restrict_to_probe(const Wavefield& field, const ProbeGeometry& geom, double dt) {
  geom.validate_inside(field.nx(), field.nz());
  ChannelData ch(geom.nc(), field.nt(), dt);
  for (int j = 0; j < geom.nc(); ++j) {
    const auto [r, c] = geom.element_cells[j];
    for (int n = 0; n < field.nt(); ++n) ch.at(j, n) = field.at(r, c, n);
  }
  return ch;
}

}  // namespace nwi
