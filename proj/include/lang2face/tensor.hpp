#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "lang2face/errors.hpp"

namespace lang2face {

// Dense row-major tensor. Layout for images/features is NCHW.
template <typename S>
struct Tensor {
  std::vector<int> shape;
  std::vector<S> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> shp) : shape(std::move(shp)) {
    data.assign(size_t(numel()), S(0));
  }
  Tensor(std::vector<int> shp, std::vector<S> d)
      : shape(std::move(shp)), data(std::move(d)) {
    if (int64_t(data.size()) != numel())
      throw ShapeMismatch("tensor data size does not match shape");
  }

  int64_t numel() const {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
  }
  int rank() const { return int(shape.size()); }
  int dim(int i) const { return shape[size_t(i)]; }

  S* ptr() { return data.data(); }
  const S* ptr() const { return data.data(); }

  S& operator[](size_t i) { return data[i]; }
  const S& operator[](size_t i) const { return data[i]; }

  // rank-2 access
  S& at(int i, int j) { return data[size_t(i) * shape[1] + j]; }
  const S& at(int i, int j) const { return data[size_t(i) * shape[1] + j]; }
  // rank-3 access
  S& at(int i, int j, int k) {
    return data[(size_t(i) * shape[1] + j) * shape[2] + k];
  }
  const S& at(int i, int j, int k) const {
    return data[(size_t(i) * shape[1] + j) * shape[2] + k];
  }
  // rank-4 access (NCHW)
  S& at(int n, int c, int h, int w) {
    return data[((size_t(n) * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }
  const S& at(int n, int c, int h, int w) const {
    return data[((size_t(n) * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }

  void fill(S v) { std::fill(data.begin(), data.end(), v); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (S v : data)
      if (!std::isfinite(double(v))) return false;
    return true;
  }

  template <typename T>
  Tensor<T> cast() const {
    Tensor<T> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = T(data[i]);
    return out;
  }

  static Tensor zeros(std::vector<int> shp) { return Tensor(std::move(shp)); }
  static Tensor full(std::vector<int> shp, S v) {
    Tensor t(std::move(shp));
    t.fill(v);
    return t;
  }
  static Tensor scalar(S v) { return Tensor({1}, {v}); }
};

inline std::string shape_str(const std::vector<int>& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

}  // namespace lang2face
