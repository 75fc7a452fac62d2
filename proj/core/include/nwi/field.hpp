// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "nwi/errors.hpp"

namespace nwi {

/// Dense 2-D real map, row-major [nx x nz]. The first index i runs along
/// the axial (depth) axis, the second index j along the lateral axis.
class Field {
 public:
  Field() : nx_(0), nz_(0) {}
  Field(int nx, int nz, double fill = 0.0)
      : nx_(nx), nz_(nz), v_(static_cast<size_t>(nx) * nz, fill) {}

  int nx() const { return nx_; }
  int nz() const { return nz_; }
  size_t size() const { return v_.size(); }

  double& operator()(int i, int j) { return v_[static_cast<size_t>(i) * nz_ + j]; }
  double operator()(int i, int j) const { return v_[static_cast<size_t>(i) * nz_ + j]; }
  double& operator[](size_t k) { return v_[k]; }
  double operator[](size_t k) const { return v_[k]; }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  auto begin() { return v_.begin(); }
  auto end() { return v_.end(); }
  auto begin() const { return v_.begin(); }
  auto end() const { return v_.end(); }

  bool same_shape(const Field& o) const { return nx_ == o.nx_ && nz_ == o.nz_; }

  double max_abs() const {
    double m = 0.0;
    for (double x : v_) m = std::max(m, std::fabs(x));
    return m;
  }

  double max() const { return v_.empty() ? 0.0 : *std::max_element(v_.begin(), v_.end()); }
  double min() const { return v_.empty() ? 0.0 : *std::min_element(v_.begin(), v_.end()); }

  bool all_finite() const {
    for (double x : v_)
      if (!std::isfinite(x)) return false;
    return true;
  }

  void fill(double x) { std::fill(v_.begin(), v_.end(), x); }

 private:
  int nx_, nz_;
  std::vector<double> v_;
};

/// Boolean mask with Field's shape conventions.
class Mask {
 public:
  Mask() : nx_(0), nz_(0) {}
  Mask(int nx, int nz, bool fill = false)
      : nx_(nx), nz_(nz), v_(static_cast<size_t>(nx) * nz, fill ? 1 : 0) {}

  int nx() const { return nx_; }
  int nz() const { return nz_; }
  size_t size() const { return v_.size(); }

  void set(int i, int j, bool b) { v_[static_cast<size_t>(i) * nz_ + j] = b ? 1 : 0; }
  bool operator()(int i, int j) const { return v_[static_cast<size_t>(i) * nz_ + j] != 0; }
  bool operator[](size_t k) const { return v_[k] != 0; }

  size_t count() const {
    size_t n = 0;
    for (auto b : v_) n += b;
    return n;
  }

 private:
  int nx_, nz_;
  std::vector<unsigned char> v_;
};

inline void require_same_shape(const Field& a, const Field& b, const char* what) {
  if (!a.same_shape(b)) throw ShapeMismatch(std::string(what) + ": field shapes differ");
}

}  // namespace nwi
