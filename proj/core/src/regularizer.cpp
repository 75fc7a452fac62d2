// SPDX-License-Identifier: Apache-2.0
#include "nwi/regularizer.hpp"

#include <cmath>

namespace nwi {

namespace {

// Detects variation along the first (i) index; the transpose detects j.
constexpr double kSobelX[3][3] = {{1, 2, 1}, {0, 0, 0}, {-1, -2, -1}};
constexpr double kSobelZ[3][3] = {{1, 0, -1}, {2, 0, -2}, {1, 0, -1}};

inline int mirror(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * (n - 1) - i;
  return i;
}

Field correlate3(const Field& f, const double k[3][3]) {
  if (f.nx() < 3 || f.nz() < 3) throw GridTooSmall("sobel: grid must be at least 3x3");
  Field out(f.nx(), f.nz());
  for (int i = 0; i < f.nx(); ++i) {
    for (int j = 0; j < f.nz(); ++j) {
      double s = 0.0;
      for (int a = -1; a <= 1; ++a)
        for (int b = -1; b <= 1; ++b)
          s += k[a + 1][b + 1] * f(mirror(i + a, f.nx()), mirror(j + b, f.nz()));
      out(i, j) = s;
    }
  }
  return out;
}

Field correlate3_transpose(const Field& y, const double k[3][3]) {
  Field out(y.nx(), y.nz(), 0.0);
  for (int i = 0; i < y.nx(); ++i) {
    for (int j = 0; j < y.nz(); ++j) {
      const double v = y(i, j);
      for (int a = -1; a <= 1; ++a)
        for (int b = -1; b <= 1; ++b)
          out(mirror(i + a, y.nx()), mirror(j + b, y.nz())) += k[a + 1][b + 1] * v;
    }
  }
  return out;
}

}  // namespace

Field sobel_response_x(const Field& map) { return correlate3(map, kSobelX); }
Field sobel_response_z(const Field& map) { return correlate3(map, kSobelZ); }

double sobel_penalty(const Field& map) {
  const Field rx = correlate3(map, kSobelX);
  const Field rz = correlate3(map, kSobelZ);
  double s = 0.0;
  for (size_t k = 0; k < rx.size(); ++k) s += rx[k] * rx[k] + rz[k] * rz[k];
  return std::sqrt(s);
}

Field sobel_penalty_gradient(const Field& map) {
  const Field rx = correlate3(map, kSobelX);
  const Field rz = correlate3(map, kSobelZ);
  double s = 0.0;
  for (size_t k = 0; k < rx.size(); ++k) s += rx[k] * rx[k] + rz[k] * rz[k];
  const double p = std::sqrt(s);
  Field g(map.nx(), map.nz(), 0.0);
  if (p <= 0.0) return g;
  const Field tx = correlate3_transpose(rx, kSobelX);
  const Field tz = correlate3_transpose(rz, kSobelZ);
  for (size_t k = 0; k < g.size(); ++k) g[k] = (tx[k] + tz[k]) / p;
  return g;
}

}  // namespace nwi
