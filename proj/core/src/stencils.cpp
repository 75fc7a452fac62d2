// SPDX-License-Identifier: Apache-2.0
#include "nwi/stencils.hpp"

namespace nwi {

namespace {

void require_min_grid(const Field& f) {
  if (f.nx() < 3 || f.nz() < 3) throw GridTooSmall("stencils: grid must be at least 3x3");
}

// Mirror a neighbour index about the boundary node: -1 -> 1, n -> n-2.
inline int mirror(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * (n - 1) - i;
  return i;
}

}  // namespace

void grad_into(const Field& f, double dx, Field& gx, Field& gz) {
  require_min_grid(f);
  const int nx = f.nx(), nz = f.nz();
  const double inv2 = 1.0 / (2.0 * dx), inv1 = 1.0 / dx;
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < nz; ++j) {
      if (i == 0)
        gx(i, j) = (f(1, j) - f(0, j)) * inv1;
      else if (i == nx - 1)
        gx(i, j) = (f(nx - 1, j) - f(nx - 2, j)) * inv1;
      else
        gx(i, j) = (f(i + 1, j) - f(i - 1, j)) * inv2;

      if (j == 0)
        gz(i, j) = (f(i, 1) - f(i, 0)) * inv1;
      else if (j == nz - 1)
        gz(i, j) = (f(i, nz - 1) - f(i, nz - 2)) * inv1;
      else
        gz(i, j) = (f(i, j + 1) - f(i, j - 1)) * inv2;
    }
  }
}

std::pair<Field, Field> grad(const Field& f, double dx) {
  Field gx(f.nx(), f.nz()), gz(f.nx(), f.nz());
  grad_into(f, dx, gx, gz);
  return {std::move(gx), std::move(gz)};
}

void grad_x_transpose_into(const Field& y, double dx, Field& out) {
  require_min_grid(y);
  const int nx = y.nx(), nz = y.nz();
  const double inv2 = 1.0 / (2.0 * dx), inv1 = 1.0 / dx;
  out.fill(0.0);
  for (int j = 0; j < nz; ++j) {
    out(1, j) += y(0, j) * inv1;
    out(0, j) -= y(0, j) * inv1;
    out(nx - 1, j) += y(nx - 1, j) * inv1;
    out(nx - 2, j) -= y(nx - 1, j) * inv1;
  }
  for (int i = 1; i < nx - 1; ++i) {
    for (int j = 0; j < nz; ++j) {
      const double v = y(i, j) * inv2;
      out(i + 1, j) += v;
      out(i - 1, j) -= v;
    }
  }
}

void grad_z_transpose_into(const Field& y, double dx, Field& out) {
  require_min_grid(y);
  const int nx = y.nx(), nz = y.nz();
  const double inv2 = 1.0 / (2.0 * dx), inv1 = 1.0 / dx;
  out.fill(0.0);
  for (int i = 0; i < nx; ++i) {
    out(i, 1) += y(i, 0) * inv1;
    out(i, 0) -= y(i, 0) * inv1;
    out(i, nz - 1) += y(i, nz - 1) * inv1;
    out(i, nz - 2) -= y(i, nz - 1) * inv1;
    for (int j = 1; j < nz - 1; ++j) {
      const double v = y(i, j) * inv2;
      out(i, j + 1) += v;
      out(i, j - 1) -= v;
    }
  }
}

void laplacian_into(const Field& f, double dx, Field& out) {
  require_min_grid(f);
  const int nx = f.nx(), nz = f.nz();
  const double invdx2 = 1.0 / (dx * dx);
  for (int i = 0; i < nx; ++i) {
    const int im = mirror(i - 1, nx), ip = mirror(i + 1, nx);
    for (int j = 0; j < nz; ++j) {
      const int jm = mirror(j - 1, nz), jp = mirror(j + 1, nz);
      out(i, j) =
          (f(ip, j) + f(im, j) + f(i, jp) + f(i, jm) - 4.0 * f(i, j)) * invdx2;
    }
  }
}

Field laplacian(const Field& f, double dx) {
  Field out(f.nx(), f.nz());
  laplacian_into(f, dx, out);
  return out;
}

void laplacian_transpose_into(const Field& y, double dx, Field& out) {
  require_min_grid(y);
  const int nx = y.nx(), nz = y.nz();
  const double invdx2 = 1.0 / (dx * dx);
  out.fill(0.0);
  for (int i = 0; i < nx; ++i) {
    const int im = mirror(i - 1, nx), ip = mirror(i + 1, nx);
    for (int j = 0; j < nz; ++j) {
      const int jm = mirror(j - 1, nz), jp = mirror(j + 1, nz);
      const double v = y(i, j) * invdx2;
      out(ip, j) += v;
      out(im, j) += v;
      out(i, jp) += v;
      out(i, jm) += v;
      out(i, j) -= 4.0 * v;
    }
  }
}

Field density_coupling(const std::pair<Field, Field>& invq_grad,
                       const std::pair<Field, Field>& u_grad) {
  require_same_shape(invq_grad.first, u_grad.first, "density_coupling");
  require_same_shape(invq_grad.second, u_grad.second, "density_coupling");
  require_same_shape(invq_grad.first, invq_grad.second, "density_coupling");
  Field out(invq_grad.first.nx(), invq_grad.first.nz());
  for (size_t k = 0; k < out.size(); ++k)
    out[k] = invq_grad.first[k] * u_grad.first[k] + invq_grad.second[k] * u_grad.second[k];
  return out;
}

}  // namespace nwi
