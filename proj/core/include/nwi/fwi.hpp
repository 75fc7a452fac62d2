// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "nwi/adjoint.hpp"
#include "nwi/forward.hpp"
#include "nwi/grid.hpp"

namespace nwi {

/// Discrete linear wave-equation operator A over N = nx*nz*nt unknowns,
/// block lower triangular in time. Row block n >= 2 carries the stepping
/// equation; blocks 0 and 1 are identity rows for the rest initial state.
/// All time blocks share the same three sub-blocks, so only those are
/// stored: the scaled-identity diagonal, the sparse (n, n-1) block and the
/// diagonal (n, n-2) block.
class LinearWaveOperator {
 public:
  enum class Kind { homogeneous, linear };

  struct Entry {
    int col;
    double val;
  };

  Kind kind() const { return kind_; }
  const SimulationGrid& grid() const { return grid_; }
  size_t cells() const { return grid_.cells(); }
  size_t unknowns() const { return grid_.unknowns(); }

  double diag_step() const { return diag_step_; }
  const std::vector<std::vector<Entry>>& b1_rows() const { return b1_rows_; }
  const std::vector<double>& b2_diag() const { return b2_diag_; }

  /// y = A x.
  std::vector<double> apply(const std::vector<double>& x) const;

  /// Nonzero entries of one global row (n, cell) as (global col, value).
  std::vector<Entry> row(int n, int cell) const;

 private:
  friend LinearWaveOperator assemble_wave_operator(const Field&, const Field&, const Field&,
                                                   const SimulationGrid&, size_t, Kind);
  Kind kind_ = Kind::linear;
  SimulationGrid grid_;
  double diag_step_ = 0.0;                   // 1/dt^2 on blocks n >= 2
  std::vector<std::vector<Entry>> b1_rows_;  // A[n, n-1], one row list per cell
  std::vector<double> b2_diag_;              // A[n, n-2] (diagonal)
};

/// A_h = dtt - diag(c0)^2 (dxx + dzz), same stencils and initial
/// conditions as the time stepper.
LinearWaveOperator assemble_homogeneous(const Field& c0, const SimulationGrid& grid,
                                        size_t max_unknowns = 200000);

/// The damped heterogeneous-density operator (the stepper's B = 0 limit):
/// dtt + 2 diag(d) dt + diag(d)^2 - diag(c^2 q) S - diag(c^2) L with
/// backward-difference dt placement and S the density-coupling operator.
LinearWaveOperator assemble_linear(const Field& c0, const Field& rho0, const Field& d,
                                   const SimulationGrid& grid, size_t max_unknowns = 200000);

/// Forward substitution over time blocks (each block solve is diagonal).
std::vector<double> solve_wavefield(const LinearWaveOperator& A, const std::vector<double>& f);

/// Backward substitution for A^T r = y.
std::vector<double> solve_wavefield_transpose(const LinearWaveOperator& A,
                                              const std::vector<double>& y);

/// Gradients of (1/2)||R A^{-1} f - m||^2 for the three linear-model maps.
struct FwiGradients {
  Field d_sos;
  Field d_density;
  Field d_attenuation;
};

/// The per-cell gradient formula: r = A^{-T} R^T (p - m), then
/// dL/dtheta_k = -(dA/dtheta_k u)^T r with the derivative applied as a
/// dense length-N vector per cell, which is what makes this path
/// O((nx nz)^2 nt).
FwiGradients fwi_gradient(const LinearWaveOperator& A, const std::vector<double>& u,
                          const ChannelData& residual, const ProbeGeometry& geom,
                          const Field& c0, const Field& rho0, const Field& d);

/// Vectorize a pulse into the operator's unknown layout (blocks 0 and 1
/// are zero: initial-condition rows).
std::vector<double> pulse_to_vector(const PulseField& pulse, const SimulationGrid& grid);

}  // namespace nwi

#include "nwi/inversion.hpp"

namespace nwi {

/// The matrix-form linear baseline loop: solve, restrict, per-cell
/// gradient, optimizer update. Estimates sos, density and attenuation;
/// the nonlinearity map is returned untouched. Tiny grids only.
PropertySet fwi_invert(const ChannelData& measured, const PulseField& pulse,
                       const PropertySet& init_props, const InversionConfig& cfg,
                       const PhysicsContext& ctx, size_t max_unknowns = 200000,
                       RunLog* log = nullptr);

}  // namespace nwi
