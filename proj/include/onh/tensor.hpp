#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "onh/rng.hpp"

namespace onh {

using Shape = std::vector<int>;

inline size_t shape_numel(const Shape& s) {
  size_t n = 1;
  for (int d : s) n *= size_t(d);
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

/// Dense row-major tensor. Scalar type is a template parameter so the same
/// layer code can run in float for training and double for finite-difference
/// verification.
template <class S>
struct TensorT {
  Shape shape;
  std::vector<S> data;

  TensorT() = default;
  explicit TensorT(Shape sh) : shape(std::move(sh)), data(shape_numel(shape), S(0)) {}
  TensorT(Shape sh, S fill) : shape(std::move(sh)), data(shape_numel(shape), fill) {}

  size_t numel() const { return data.size(); }
  int dim(int i) const { return shape[size_t(i)]; }
  int rank() const { return int(shape.size()); }

  S* ptr() { return data.data(); }
  const S* ptr() const { return data.data(); }

  // NHWC accessors for the 4-D case.
  S& at4(int n, int h, int w, int c) {
    return data[((size_t(n) * shape[1] + h) * shape[2] + w) * shape[3] + c];
  }
  S at4(int n, int h, int w, int c) const {
    return data[((size_t(n) * shape[1] + h) * shape[2] + w) * shape[3] + c];
  }
  S& at2(int n, int d) { return data[size_t(n) * shape[1] + d]; }
  S at2(int n, int d) const { return data[size_t(n) * shape[1] + d]; }

  void fill(S v) { std::fill(data.begin(), data.end(), v); }

  void fill_normal(Rng& rng, double mean, double sd) {
    for (auto& v : data) v = S(rng.normal(mean, sd));
  }

  bool all_finite() const {
    for (S v : data)
      if (!std::isfinite(double(v))) return false;
    return true;
  }

  void require_finite(const std::string& what) const {
    if (!all_finite()) throw std::runtime_error("non-finite values in " + what);
  }

  template <class T>
  TensorT<T> cast() const {
    TensorT<T> out(shape);
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = T(data[i]);
    return out;
  }
};

using Tensor = TensorT<float>;

inline void require_shape(const Shape& got, const Shape& want, const std::string& what) {
  if (got != want)
    throw std::invalid_argument(what + ": shape " + shape_str(got) + ", expected " + shape_str(want));
}

}  // namespace onh
