// Dense row-major tensor, double precision. Rank 1 and 2 cover everything
// this project needs; shapes are checked at the call sites that care.
#pragma once

#include <cassert>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "zcap/rng.hpp"

namespace zcap {

struct Tensor {
  std::vector<size_t> shape;
  std::vector<double> v;

  Tensor() = default;
  explicit Tensor(std::vector<size_t> s) : shape(std::move(s)) {
    v.assign(count(shape), 0.0);
  }

  static size_t count(const std::vector<size_t>& s) {
    size_t n = 1;
    for (size_t d : s) n *= d;
    return n;
  }

  static Tensor zeros(std::vector<size_t> s) { return Tensor(std::move(s)); }

  static Tensor full(std::vector<size_t> s, double value) {
    Tensor t(std::move(s));
    for (double& x : t.v) x = value;
    return t;
  }

  static Tensor from(std::vector<size_t> s, std::vector<double> data) {
    Tensor t;
    t.shape = std::move(s);
    if (count(t.shape) != data.size()) throw std::invalid_argument("tensor: data/shape mismatch");
    t.v = std::move(data);
    return t;
  }

  static Tensor randn(std::vector<size_t> s, Rng& rng, double sigma = 1.0) {
    Tensor t(std::move(s));
    for (double& x : t.v) x = rng.normal(0.0, sigma);
    return t;
  }

  size_t size() const { return v.size(); }
  size_t rank() const { return shape.size(); }
  size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  size_t cols() const { return shape.size() < 2 ? (shape.empty() ? 0 : 1) : shape[1]; }

  double& at(size_t i, size_t j) {
    assert(rank() == 2 && i < shape[0] && j < shape[1]);
    return v[i * shape[1] + j];
  }
  double at(size_t i, size_t j) const {
    assert(rank() == 2 && i < shape[0] && j < shape[1]);
    return v[i * shape[1] + j];
  }
  double& operator[](size_t i) { return v[i]; }
  double operator[](size_t i) const { return v[i]; }

  double* row(size_t i) {
    assert(rank() == 2);
    return v.data() + i * shape[1];
  }
  const double* row(size_t i) const {
    assert(rank() == 2);
    return v.data() + i * shape[1];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  void fill(double x) {
    for (double& e : v) e = x;
  }
};

}  // namespace zcap
