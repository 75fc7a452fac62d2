// SPDX-License-Identifier: Apache-2.0
#include "nwi/fwi.hpp"

#include <cmath>
#include <map>
#include <string>

namespace nwi {

namespace {

inline int mirror(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * (n - 1) - i;
  return i;
}

void check_size(const SimulationGrid& grid, size_t max_unknowns) {
  if (grid.unknowns() > max_unknowns)
    throw ProblemTooLarge("fwi: " + std::to_string(grid.unknowns()) + " unknowns exceed the cap " +
                          std::to_string(max_unknowns));
}

// Gradient-stencil row of one cell along the given axis, as (cell, coeff).
void axis_grad_row(int i, int j, int nx, int nz, double dx, bool axis_x,
                   std::map<int, double>& row, double scale) {
  const int idx = axis_x ? i : j;
  const int n = axis_x ? nx : nz;
  auto cell = [&](int off) {
    return axis_x ? (i + off) * nz + j : i * nz + (j + off);
  };
  if (idx == 0) {
    row[cell(1)] += scale / dx;
    row[cell(0)] -= scale / dx;
  } else if (idx == n - 1) {
    row[cell(0)] += scale / dx;
    row[cell(-1)] -= scale / dx;
  } else {
    row[cell(1)] += scale / (2.0 * dx);
    row[cell(-1)] -= scale / (2.0 * dx);
  }
}

}  // namespace

LinearWaveOperator assemble_wave_operator(const Field& c0, const Field& rho0, const Field& d,
                                          const SimulationGrid& grid, size_t max_unknowns,
                                          LinearWaveOperator::Kind kind) {
  check_size(grid, max_unknowns);
  if (c0.nx() != grid.nx || c0.nz() != grid.nz)
    throw ShapeMismatch("fwi: sos map does not match grid");
  require_same_shape(c0, rho0, "fwi assemble");
  require_same_shape(c0, d, "fwi assemble");

  const int nx = grid.nx, nz = grid.nz;
  const double dt = grid.dt, dx = grid.dx;
  const double inv_dt2 = 1.0 / (dt * dt), inv_dx2 = 1.0 / (dx * dx);

  Field invq(nx, nz);
  for (size_t k = 0; k < invq.size(); ++k) invq[k] = 1.0 / rho0[k];
  const auto [px, pz] = grad(invq, dx);

  LinearWaveOperator A;
  A.kind_ = kind;
  A.grid_ = grid;
  A.diag_step_ = inv_dt2;
  A.b1_rows_.resize(grid.cells());
  A.b2_diag_.resize(grid.cells());

  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < nz; ++j) {
      const int r = i * nz + j;
      const double dd = d[r];
      const double cq = c0[r] * c0[r] * rho0[r];
      const double c2 = c0[r] * c0[r];

      std::map<int, double> row;
      // -G2 diagonal piece: -2/dt^2 + 2d/dt + d^2.
      row[r] += -2.0 * inv_dt2 + 2.0 * dd / dt + dd * dd;
      // Density coupling: -cq * (px Gx + pz Gz).
      axis_grad_row(i, j, nx, nz, dx, true, row, -cq * px[r]);
      axis_grad_row(i, j, nx, nz, dx, false, row, -cq * pz[r]);
      // Laplacian: -c2 * L with mirrored neighbours.
      row[mirror(i + 1, nx) * nz + j] += -c2 * inv_dx2;
      row[mirror(i - 1, nx) * nz + j] += -c2 * inv_dx2;
      row[i * nz + mirror(j + 1, nz)] += -c2 * inv_dx2;
      row[i * nz + mirror(j - 1, nz)] += -c2 * inv_dx2;
      row[r] += 4.0 * c2 * inv_dx2;

      auto& out = A.b1_rows_[r];
      out.reserve(row.size());
      for (const auto& [col, val] : row) out.push_back({col, val});

      A.b2_diag_[r] = inv_dt2 - 2.0 * dd / dt;
    }
  }
  return A;
}

LinearWaveOperator assemble_homogeneous(const Field& c0, const SimulationGrid& grid,
                                        size_t max_unknowns) {
  const Field ones(c0.nx(), c0.nz(), 1.0);
  const Field zeros(c0.nx(), c0.nz(), 0.0);
  return assemble_wave_operator(c0, ones, zeros, grid, max_unknowns,
                                LinearWaveOperator::Kind::homogeneous);
}

LinearWaveOperator assemble_linear(const Field& c0, const Field& rho0, const Field& d,
                                   const SimulationGrid& grid, size_t max_unknowns) {
  return assemble_wave_operator(c0, rho0, d, grid, max_unknowns,
                                LinearWaveOperator::Kind::linear);
}

std::vector<double> LinearWaveOperator::apply(const std::vector<double>& x) const {
  if (x.size() != unknowns()) throw ShapeMismatch("fwi apply: vector length mismatch");
  const size_t nc = cells();
  std::vector<double> y(x.size(), 0.0);
  // Identity blocks for the initial conditions.
  for (size_t k = 0; k < 2 * nc; ++k) y[k] = x[k];
  for (int n = 2; n < grid_.nt; ++n) {
    const double* x0 = x.data() + (static_cast<size_t>(n) - 2) * nc;
    const double* x1 = x.data() + (static_cast<size_t>(n) - 1) * nc;
    const double* x2 = x.data() + static_cast<size_t>(n) * nc;
    double* yn = y.data() + static_cast<size_t>(n) * nc;
    for (size_t r = 0; r < nc; ++r) {
      double s = diag_step_ * x2[r] + b2_diag_[r] * x0[r];
      for (const auto& e : b1_rows_[r]) s += e.val * x1[e.col];
      yn[r] = s;
    }
  }
  return y;
}

std::vector<LinearWaveOperator::Entry> LinearWaveOperator::row(int n, int cell) const {
  std::vector<Entry> out;
  const int nc = static_cast<int>(cells());
  if (n < 2) {
    out.push_back({n * nc + cell, 1.0});
    return out;
  }
  out.push_back({(n - 2) * nc + cell, b2_diag_[cell]});
  for (const auto& e : b1_rows_[cell]) out.push_back({(n - 1) * nc + e.col, e.val});
  out.push_back({n * nc + cell, diag_step_});
  return out;
}

std::vector<double> solve_wavefield(const LinearWaveOperator& A, const std::vector<double>& f) {
  if (f.size() != A.unknowns()) throw ShapeMismatch("fwi solve: vector length mismatch");
  if (A.diag_step() == 0.0) throw SingularBlock("fwi solve: zero diagonal block");
  const size_t nc = A.cells();
  std::vector<double> u(f.size(), 0.0);
  for (size_t k = 0; k < 2 * nc; ++k) u[k] = f[k];
  const double inv_diag = 1.0 / A.diag_step();
  for (int n = 2; n < A.grid().nt; ++n) {
    const double* u0 = u.data() + (static_cast<size_t>(n) - 2) * nc;
    const double* u1 = u.data() + (static_cast<size_t>(n) - 1) * nc;
    double* un = u.data() + static_cast<size_t>(n) * nc;
    const double* fn = f.data() + static_cast<size_t>(n) * nc;
    for (size_t r = 0; r < nc; ++r) {
      double s = fn[r] - A.b2_diag()[r] * u0[r];
      for (const auto& e : A.b1_rows()[r]) s -= e.val * u1[e.col];
      un[r] = s * inv_diag;
    }
  }
  return u;
}

std::vector<double> solve_wavefield_transpose(const LinearWaveOperator& A,
                                              const std::vector<double>& y) {
  if (y.size() != A.unknowns()) throw ShapeMismatch("fwi solve^T: vector length mismatch");
  if (A.diag_step() == 0.0) throw SingularBlock("fwi solve^T: zero diagonal block");
  const size_t nc = A.cells();
  const int nt = A.grid().nt;
  std::vector<double> r(y.size(), 0.0);
  std::vector<double> rhs(nc);
  for (int n = nt - 1; n >= 0; --n) {
    double* rn = r.data() + static_cast<size_t>(n) * nc;
    const double* yn = y.data() + static_cast<size_t>(n) * nc;
    std::copy(yn, yn + nc, rhs.begin());
    if (n + 1 <= nt - 1 && n + 1 >= 2) {
      // rhs -= B1^T r[n+1]
      const double* rn1 = r.data() + (static_cast<size_t>(n) + 1) * nc;
      for (size_t row = 0; row < nc; ++row)
        for (const auto& e : A.b1_rows()[row]) rhs[e.col] -= e.val * rn1[row];
    }
    if (n + 2 <= nt - 1) {
      const double* rn2 = r.data() + (static_cast<size_t>(n) + 2) * nc;
      for (size_t row = 0; row < nc; ++row) rhs[row] -= A.b2_diag()[row] * rn2[row];
    }
    const double inv_diag = n >= 2 ? 1.0 / A.diag_step() : 1.0;
    for (size_t row = 0; row < nc; ++row) rn[row] = rhs[row] * inv_diag;
  }
  return r;
}

std::vector<double> pulse_to_vector(const PulseField& pulse, const SimulationGrid& grid) {
  pulse.check_grid(grid);
  std::vector<double> f(grid.unknowns(), 0.0);
  const size_t nc = grid.cells();
  for (const auto& s : pulse.sources()) {
    const size_t cell = static_cast<size_t>(s.i) * grid.nz + s.j;
    for (int n = 2; n < grid.nt; ++n) f[static_cast<size_t>(n) * nc + cell] = s.trace[n];
  }
  return f;
}

FwiGradients fwi_gradient(const LinearWaveOperator& A, const std::vector<double>& u,
                          const ChannelData& residual, const ProbeGeometry& geom,
                          const Field& c0, const Field& rho0, const Field& d) {
  const SimulationGrid& grid = A.grid();
  if (u.size() != A.unknowns()) throw ShapeMismatch("fwi_gradient: wavefield length mismatch");
  if (residual.nc != geom.nc() || residual.nt != grid.nt)
    throw ShapeMismatch("fwi_gradient: residual must be [nc x nt]");
  geom.validate_inside(grid.nx, grid.nz);

  const int nx = grid.nx, nz = grid.nz, nt = grid.nt;
  const size_t cells = grid.cells();
  const size_t N = A.unknowns();
  const double dt = grid.dt;

  // r = A^{-T} R^T (p - m).
  std::vector<double> y(N, 0.0);
  for (int j = 0; j < geom.nc(); ++j) {
    const auto [ri, cj] = geom.element_cells[j];
    const size_t cell = static_cast<size_t>(ri) * nz + cj;
    for (int n = 0; n < nt; ++n) y[static_cast<size_t>(n) * cells + cell] = residual.at(j, n);
  }
  const std::vector<double> r = solve_wavefield_transpose(A, y);

  // Per-step spatial responses of the solved field (operands of dA/dtheta).
  Field invq(nx, nz);
  for (size_t k = 0; k < invq.size(); ++k) invq[k] = 1.0 / rho0[k];
  const auto [px, pz] = grad(invq, grid.dx);

  std::vector<Field> coup(nt), lapl(nt), gxu(nt), gzu(nt);
  Field uf(nx, nz), gx(nx, nz), gzf(nx, nz), lp(nx, nz);
  for (int n = 2; n < nt; ++n) {
    const double* s = u.data() + (static_cast<size_t>(n) - 1) * cells;
    std::copy(s, s + cells, uf.data());
    grad_into(uf, grid.dx, gx, gzf);
    laplacian_into(uf, grid.dx, lp);
    Field cp(nx, nz);
    for (size_t k = 0; k < cp.size(); ++k) cp[k] = px[k] * gx[k] + pz[k] * gzf[k];
    coup[n] = cp;
    lapl[n] = lp;
    gxu[n] = gx;
    gzu[n] = gzf;
  }

  // Column adjacency of the gradient stencils, for the 1/rho chain.
  std::vector<std::vector<LinearWaveOperator::Entry>> col_x(cells), col_z(cells);
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < nz; ++j) {
      std::map<int, double> rx, rz;
      axis_grad_row(i, j, nx, nz, grid.dx, true, rx, 1.0);
      axis_grad_row(i, j, nx, nz, grid.dx, false, rz, 1.0);
      const int row = i * nz + j;
      for (const auto& [col, val] : rx) col_x[col].push_back({row, val});
      for (const auto& [col, val] : rz) col_z[col].push_back({row, val});
    }
  }

  FwiGradients g{Field(nx, nz), Field(nx, nz), Field(nx, nz)};

  // Per-cell formula: hold v = (dA/dtheta_k) u as a dense
  // length-N vector and take -v.r for every cell k. The dense dot is the
  // O(nx nz nt) inner operation that makes this path O((nx nz)^2 nt);
  // between cells only the entries just written are cleared.
  std::vector<double> v(N, 0.0);
  std::vector<size_t> written;
  written.reserve(static_cast<size_t>(nt) * 8);
  auto minus_dot_and_reset = [&](const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < v.size(); ++i) s += v[i] * b[i];
    for (size_t i : written) v[i] = 0.0;
    written.clear();
    return -s;
  };

  for (size_t k = 0; k < cells; ++k) {
    const double c = c0[k], q = rho0[k];
    for (int n = 2; n < nt; ++n) {
      const size_t idx = static_cast<size_t>(n) * cells + k;
      v[idx] = -2.0 * c * q * coup[n][k] - 2.0 * c * lapl[n][k];
      written.push_back(idx);
    }
    g.d_sos[k] = minus_dot_and_reset(r);
  }

  for (size_t k = 0; k < cells; ++k) {
    const double c = c0[k], q = rho0[k];
    for (int n = 2; n < nt; ++n) {
      double* vn = v.data() + static_cast<size_t>(n) * cells;
      vn[k] += -c * c * coup[n][k];
      written.push_back(static_cast<size_t>(n) * cells + k);
      for (const auto& e : col_x[k]) {
        const double cqj = c0[e.col] * c0[e.col] * rho0[e.col];
        vn[e.col] += cqj * e.val * gxu[n][e.col] / (q * q);
        written.push_back(static_cast<size_t>(n) * cells + e.col);
      }
      for (const auto& e : col_z[k]) {
        const double cqj = c0[e.col] * c0[e.col] * rho0[e.col];
        vn[e.col] += cqj * e.val * gzu[n][e.col] / (q * q);
        written.push_back(static_cast<size_t>(n) * cells + e.col);
      }
    }
    g.d_density[k] = minus_dot_and_reset(r);
  }

  for (size_t k = 0; k < cells; ++k) {
    const double dd = d[k];
    for (int n = 2; n < nt; ++n) {
      const double u1 = u[(static_cast<size_t>(n) - 1) * cells + k];
      const double u2 = u[(static_cast<size_t>(n) - 2) * cells + k];
      const size_t idx = static_cast<size_t>(n) * cells + k;
      v[idx] = 2.0 / dt * (u1 - u2) + 2.0 * dd * u1;
      written.push_back(idx);
    }
    g.d_attenuation[k] = minus_dot_and_reset(r);
  }

  return g;
}

}  // namespace nwi
