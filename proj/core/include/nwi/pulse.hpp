// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "nwi/field.hpp"
#include "nwi/grid.hpp"

namespace nwi {

/// Exterior force F over space-time. Nonzero only at transducer element
/// cells, so storage is compressed to one trace per active cell; value()
/// reads the logical dense [nx x nz x nt] tensor.
class PulseField {
 public:
  struct Source {
    int i, j;
    std::vector<double> trace;  // length nt
  };

  PulseField() = default;
  PulseField(int nx, int nz, int nt) : nx_(nx), nz_(nz), nt_(nt) {}

  int nx() const { return nx_; }
  int nz() const { return nz_; }
  int nt() const { return nt_; }

  void add_source(int i, int j, std::vector<double> trace);

  const std::vector<Source>& sources() const { return sources_; }

  double value(int i, int j, int n) const {
    for (const auto& s : sources_)
      if (s.i == i && s.j == j) return s.trace[n];
    return 0.0;
  }

  /// Dense forcing map at one time step (mostly for the matrix baseline).
  Field slice(int n) const {
    Field f(nx_, nz_, 0.0);
    for (const auto& s : sources_) f(s.i, s.j) = s.trace[n];
    return f;
  }

  void check_grid(const SimulationGrid& grid) const;

 private:
  int nx_ = 0, nz_ = 0, nt_ = 0;
  std::vector<Source> sources_;
};

}  // namespace nwi
