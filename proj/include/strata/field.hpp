#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "strata/common.hpp"

namespace strata {

struct Dims3 {
  Index nx = 0;
  Index ny = 0;
  Index nz = 0;
  Index size() const { return nx * ny * nz; }
  bool operator==(const Dims3&) const = default;
};

/// Complex values on a tensor grid, k fastest.
class Field3D {
 public:
  Field3D() = default;
  explicit Field3D(Dims3 d) : dims_(d), data_(static_cast<std::size_t>(d.size()), cplx{0.0, 0.0}) {
    if (d.nx < 0 || d.ny < 0 || d.nz < 0) throw DimensionError("negative field dimension");
  }
  Field3D(Index nx, Index ny, Index nz) : Field3D(Dims3{nx, ny, nz}) {}

  const Dims3& dims() const { return dims_; }
  Index nx() const { return dims_.nx; }
  Index ny() const { return dims_.ny; }
  Index nz() const { return dims_.nz; }
  Index size() const { return dims_.size(); }

  Index index(Index i, Index j, Index k) const { return (i * dims_.ny + j) * dims_.nz + k; }

  cplx& operator()(Index i, Index j, Index k) { return data_[static_cast<std::size_t>(index(i, j, k))]; }
  const cplx& operator()(Index i, Index j, Index k) const { return data_[static_cast<std::size_t>(index(i, j, k))]; }

  cplx* data() { return data_.data(); }
  const cplx* data() const { return data_.data(); }
  std::vector<cplx>& values() { return data_; }
  const std::vector<cplx>& values() const { return data_; }

  /// Pointer to the z-line at (i, j).
  cplx* line(Index i, Index j) { return data_.data() + index(i, j, 0); }
  const cplx* line(Index i, Index j) const { return data_.data() + index(i, j, 0); }

  void fill(cplx v) { std::fill(data_.begin(), data_.end(), v); }

  double max_abs() const {
    double m = 0.0;
    for (const auto& v : data_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  Dims3 dims_;
  std::vector<cplx> data_;
};

inline double max_abs_diff(const Field3D& a, const Field3D& b) {
  if (!(a.dims() == b.dims())) throw DimensionError("field dimension mismatch");
  double m = 0.0;
  for (Index n = 0; n < a.size(); ++n) m = std::max(m, std::abs(a.data()[n] - b.data()[n]));
  return m;
}

/// max|a-b| / max|b| (0 when both vanish).
inline double relative_inf_error(const Field3D& a, const Field3D& b) {
  const double d = max_abs_diff(a, b);
  const double s = b.max_abs();
  if (s == 0.0) return d == 0.0 ? 0.0 : INFINITY;
  return d / s;
}

struct Index3 {
  Index i = 0;
  Index j = 0;
  Index k = 0;
  bool operator==(const Index3&) const = default;
};

}  // namespace strata
