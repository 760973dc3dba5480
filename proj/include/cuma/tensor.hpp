#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "cuma/common.hpp"

namespace cuma::ad {

// Dense row-major matrix of doubles. Vectors are 1xN, scalars 1x1.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {
    require(r > 0 && c > 0, "tensor: shape must be positive, got ", r, "x", c);
  }
  Tensor(int r, int c, std::vector<double> data) : rows(r), cols(c), v(std::move(data)) {
    require(r > 0 && c > 0, "tensor: shape must be positive, got ", r, "x", c);
    require(v.size() == static_cast<std::size_t>(r) * c, "tensor: data length ", v.size(),
            " does not match shape ", r, "x", c);
  }

  static Tensor scalar(double x) { return Tensor(1, 1, {x}); }
  static Tensor row(std::vector<double> data) {
    const int n = static_cast<int>(data.size());
    return Tensor(1, n, std::move(data));
  }
  static Tensor filled(int r, int c, double x) {
    Tensor t(r, c);
    for (double& e : t.v) e = x;
    return t;
  }

  std::size_t numel() const { return v.size(); }
  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
  double item() const {
    require(rows == 1 && cols == 1, "tensor: item() on non-scalar ", rows, "x", cols);
    return v[0];
  }

  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  bool all_finite() const {
    for (double e : v)
      if (!std::isfinite(e)) return false;
    return true;
  }
};

inline std::string shape_str(const Tensor& t) {
  return std::to_string(t.rows) + "x" + std::to_string(t.cols);
}

}  // namespace cuma::ad
