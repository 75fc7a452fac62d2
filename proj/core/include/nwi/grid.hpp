// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <utility>
#include <vector>

#include "nwi/field.hpp"

namespace nwi {

/// Space-time discretization: isotropic spatial interval dx on an
/// nx x nz grid, nt time samples spaced dt.
struct SimulationGrid {
  int nx = 0;
  int nz = 0;
  int nt = 0;
  double dx = 0.0;
  double dt = 0.0;

  SimulationGrid() = default;
  SimulationGrid(int nx, int nz, int nt, double dx, double dt);

  size_t cells() const { return static_cast<size_t>(nx) * nz; }
  size_t unknowns() const { return cells() * nt; }
};

/// The four material maps: speed of sound C [m/s], density Q [kg/m^3],
/// attenuation D [1/s], nonlinearity B [dimensionless].
struct PropertySet {
  Field sos;
  Field density;
  Field attenuation;
  Field nonlinearity;

  PropertySet() = default;
  PropertySet(Field sos, Field density, Field attenuation, Field nonlinearity);

  static PropertySet uniform(int nx, int nz, double c, double q, double d, double b);

  int nx() const { return sos.nx(); }
  int nz() const { return sos.nz(); }
};

/// Pressure over the full space-time grid, slice n = pressure map at step n.
class Wavefield {
 public:
  Wavefield() = default;
  explicit Wavefield(const SimulationGrid& grid)
      : nx_(grid.nx), nz_(grid.nz), nt_(grid.nt), v_(grid.unknowns(), 0.0) {}

  int nx() const { return nx_; }
  int nz() const { return nz_; }
  int nt() const { return nt_; }

  double* slice(int n) { return v_.data() + static_cast<size_t>(n) * nx_ * nz_; }
  const double* slice(int n) const { return v_.data() + static_cast<size_t>(n) * nx_ * nz_; }

  double at(int i, int j, int n) const {
    return v_[(static_cast<size_t>(n) * nx_ + i) * nz_ + j];
  }
  double& at(int i, int j, int n) { return v_[(static_cast<size_t>(n) * nx_ + i) * nz_ + j]; }

  Field slice_field(int n) const {
    Field f(nx_, nz_);
    const double* s = slice(n);
    std::copy(s, s + f.size(), f.data());
    return f;
  }

  const std::vector<double>& raw() const { return v_; }
  std::vector<double>& raw() { return v_; }

 private:
  int nx_ = 0, nz_ = 0, nt_ = 0;
  std::vector<double> v_;
};

/// Pressure sampled at the nc transducer elements over nt steps.
struct ChannelData {
  int nc = 0;
  int nt = 0;
  double dt = 0.0;
  std::vector<double> samples;  // row-major [nc x nt]

  ChannelData() = default;
  ChannelData(int nc, int nt, double dt)
      : nc(nc), nt(nt), dt(dt), samples(static_cast<size_t>(nc) * nt, 0.0) {}

  double& at(int c, int n) { return samples[static_cast<size_t>(c) * nt + n]; }
  double at(int c, int n) const { return samples[static_cast<size_t>(c) * nt + n]; }
};

/// Linear array at the top of the grid: nc element cells on one row,
/// strictly increasing column.
struct ProbeGeometry {
  std::vector<std::pair<int, int>> element_cells;  // (row, col)
  int pitch_cells = 1;

  ProbeGeometry() = default;
  ProbeGeometry(std::vector<std::pair<int, int>> cells, int pitch_cells);

  /// Evenly pitched linear array on a single row.
  static ProbeGeometry linear(int row, int first_col, int nc, int pitch_cells);

  int nc() const { return static_cast<int>(element_cells.size()); }
  void validate_inside(int nx, int nz) const;
};

/// C_r = max(C) * dt / dx.
double courant_number(const PropertySet& props, const SimulationGrid& grid);

/// Throws CflViolation when C_r > 1.
void check_cfl(const PropertySet& props, const SimulationGrid& grid);

/// Gather the field at element cells; samples[j][n] = pressure[r_j][c_j][n].
ChannelData restrict_to_probe(const Wavefield& field, const ProbeGeometry& geom, double dt);

}  // namespace nwi
