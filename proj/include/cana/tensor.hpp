#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace cana::num {

/// Dense row-major tensor of doubles. Rank is 1 or 2 everywhere in this
/// project; scalars are represented as shape {1}.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> v;

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
    v.assign(size_from_shape(shape), 0.0);
  }

  Tensor(std::size_t rows, std::size_t cols)
      : shape{rows, cols}, v(rows * cols, 0.0) {}

  static Tensor scalar(double x) {
    Tensor t({1});
    t.v[0] = x;
    return t;
  }

  static Tensor row(std::vector<double> vals) {
    Tensor t;
    t.shape = {1, vals.size()};
    t.v = std::move(vals);
    return t;
  }

  static std::size_t size_from_shape(const std::vector<std::size_t>& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1},
                           [](std::size_t a, std::size_t b) { return a * b; });
  }

  std::size_t size() const { return v.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& at(std::size_t r, std::size_t c) { return v[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return v[r * cols() + c]; }

  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  void fill(double x) { std::fill(v.begin(), v.end(), x); }

  bool all_finite() const;
};

void require(bool cond, const char* msg);

}  // namespace cana::num
