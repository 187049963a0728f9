#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mcsbn/rng.hpp"

namespace mcsbn {

// Dense row-major tensor. Weight matrices throughout the library are stored
// input-major: W has shape (fan_in, fan_out) and y_j = sum_i x_i * W(i, j),
// so multi-hot inputs reduce to contiguous row sums.
template <typename T>
struct Tensor {
  std::vector<size_t> shape;
  std::vector<T> v;

  Tensor() = default;
  explicit Tensor(std::vector<size_t> s) : shape(std::move(s)) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    v.assign(n, T(0));
  }
  static Tensor vec(size_t n) { return Tensor({n}); }
  static Tensor mat(size_t rows, size_t cols) { return Tensor({rows, cols}); }

  size_t size() const { return v.size(); }
  size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  T* data() { return v.data(); }
  const T* data() const { return v.data(); }
  T* row(size_t r) { return v.data() + r * cols(); }
  const T* row(size_t r) const { return v.data() + r * cols(); }
  T& at(size_t r, size_t c) { return v[r * cols() + c]; }
  T at(size_t r, size_t c) const { return v[r * cols() + c]; }

  std::span<T> span() { return {v.data(), v.size()}; }
  std::span<const T> span() const { return {v.data(), v.size()}; }

  void zero() { std::fill(v.begin(), v.end(), T(0)); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (T x : v)
      if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
  }

  void init_uniform(Rng& rng) {
    // matrices ~ U(+-1/sqrt(fan_in)) with fan_in = rows; vectors stay zero
    if (shape.size() < 2) return;
    double bound = 1.0 / std::sqrt(static_cast<double>(rows()));
    for (T& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
  }

  using EigenVec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
  using EigenMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Eigen::Map<EigenMat> mview() { return {v.data(), (Eigen::Index)rows(), (Eigen::Index)cols()}; }
  Eigen::Map<const EigenMat> mview() const {
    return {v.data(), (Eigen::Index)rows(), (Eigen::Index)cols()};
  }
  Eigen::Map<EigenVec> vview() { return {v.data(), (Eigen::Index)v.size()}; }
  Eigen::Map<const EigenVec> vview() const { return {v.data(), (Eigen::Index)v.size()}; }
};

template <typename T>
using NamedTensors = std::vector<std::pair<std::string, Tensor<T>*>>;

template <typename T>
inline Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> as_evec(std::span<const T> s) {
  return {s.data(), (Eigen::Index)s.size()};
}
template <typename T>
inline Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> as_evec(std::span<T> s) {
  return {s.data(), (Eigen::Index)s.size()};
}

template <typename T>
inline void check_finite(std::span<const T> s, const char* what) {
  for (T x : s)
    if (!std::isfinite(static_cast<double>(x)))
      throw std::runtime_error(std::string("non-finite value in ") + what);
}

} // namespace mcsbn
