#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mcsbn/tensor.hpp"

namespace mcsbn {

template <typename T>
struct AdamConfig {
  T lr = T(1e-3);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
};

// Standard Adam with bias correction; one (m, v) pair per parameter tensor,
// matched by position.
template <typename T>
struct AdamState {
  AdamConfig<T> cfg;
  int64_t t = 0;
  std::vector<Tensor<T>> m, v;

  AdamState() = default;
  AdamState(const std::vector<Tensor<T>*>& params, AdamConfig<T> c) : cfg(c) {
    for (const Tensor<T>* p : params) {
      m.emplace_back(p->shape);
      v.emplace_back(p->shape);
    }
  }
};

template <typename T>
void adam_update(AdamState<T>& st, const std::vector<Tensor<T>*>& params,
                 const std::vector<const Tensor<T>*>& grads) {
  if (params.size() != st.m.size() || grads.size() != params.size())
    throw std::invalid_argument("adam_update: tensor count mismatch");
  st.t += 1;
  const T b1 = st.cfg.beta1, b2 = st.cfg.beta2;
  const T corr1 = T(1) - std::pow(b1, static_cast<T>(st.t));
  const T corr2 = T(1) - std::pow(b2, static_cast<T>(st.t));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = *params[i];
    const Tensor<T>& g = *grads[i];
    if (!p.same_shape(st.m[i]) || !g.same_shape(p))
      throw std::invalid_argument("adam_update: shape mismatch");
    T* pm = st.m[i].data();
    T* pv = st.v[i].data();
    T* pp = p.data();
    const T* pg = g.data();
    const size_t n = p.size();
    for (size_t j = 0; j < n; ++j) {
      pm[j] = b1 * pm[j] + (T(1) - b1) * pg[j];
      pv[j] = b2 * pv[j] + (T(1) - b2) * pg[j] * pg[j];
      T mhat = pm[j] / corr1;
      T vhat = pv[j] / corr2;
      pp[j] -= st.cfg.lr * mhat / (std::sqrt(vhat) + st.cfg.eps);
    }
  }
}

} // namespace mcsbn
