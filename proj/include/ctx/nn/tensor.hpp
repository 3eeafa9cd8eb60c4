#pragma once

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

namespace ctx::nn {

// Dense double tensor. Rank 4 (N,C,H,W) through the conv stack, rank 2
// (N,features) after pooling.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(numel_of(shape), 0.0);
  }

  static size_t numel_of(const std::vector<int>& s) {
    size_t n = 1;
    for (int d : s) n *= static_cast<size_t>(d);
    return n;
  }

  size_t numel() const { return data.size(); }

  int dim(size_t i) const { return shape[i]; }

  // NCHW accessor.
  double& at4(int n, int c, int h, int w) {
    return data[((static_cast<size_t>(n) * shape[1] + c) * shape[2] + h) *
                    shape[3] +
                w];
  }
  double at4(int n, int c, int h, int w) const {
    return data[((static_cast<size_t>(n) * shape[1] + c) * shape[2] + h) *
                    shape[3] +
                w];
  }

  double& at2(int n, int f) {
    return data[static_cast<size_t>(n) * shape[1] + f];
  }
  double at2(int n, int f) const {
    return data[static_cast<size_t>(n) * shape[1] + f];
  }

  void zero() { std::fill(data.begin(), data.end(), 0.0); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  std::string shape_str() const;
};

// A named trainable tensor with its gradient accumulator.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;

  explicit Param(std::string n, std::vector<int> shape)
      : name(std::move(n)), value(shape), grad(std::move(shape)) {}
};

} // namespace ctx::nn
