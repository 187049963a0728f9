#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "mcsbn/tensor.hpp"

namespace mcsbn {

template <typename T>
inline T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

// Gate and candidate weights for one GRU cell. All matrices are stored
// input-major (fan_in, hidden); see tensor.hpp.
template <typename T>
struct GruParams {
  size_t input_dim = 0, hidden_dim = 0;
  Tensor<T> wz, wr, wh; // (input_dim, hidden)
  Tensor<T> uz, ur, uh; // (hidden, hidden)
  Tensor<T> bz, br, bh; // (hidden)

  GruParams() = default;
  GruParams(size_t in, size_t hid) : input_dim(in), hidden_dim(hid) {
    wz = Tensor<T>::mat(in, hid);
    wr = Tensor<T>::mat(in, hid);
    wh = Tensor<T>::mat(in, hid);
    uz = Tensor<T>::mat(hid, hid);
    ur = Tensor<T>::mat(hid, hid);
    uh = Tensor<T>::mat(hid, hid);
    bz = Tensor<T>::vec(hid);
    br = Tensor<T>::vec(hid);
    bh = Tensor<T>::vec(hid);
  }

  void init(Rng& rng) {
    for (Tensor<T>* m : {&wz, &wr, &wh, &uz, &ur, &uh}) m->init_uniform(rng);
  }

  void visit(const std::string& prefix, NamedTensors<T>& out) {
    out.push_back({prefix + ".wz", &wz});
    out.push_back({prefix + ".wr", &wr});
    out.push_back({prefix + ".wh", &wh});
    out.push_back({prefix + ".uz", &uz});
    out.push_back({prefix + ".ur", &ur});
    out.push_back({prefix + ".uh", &uh});
    out.push_back({prefix + ".bz", &bz});
    out.push_back({prefix + ".br", &br});
    out.push_back({prefix + ".bh", &bh});
  }
};

// Sparse multi-hot input: the active vocabulary indices of one session.
template <typename T>
struct MultiHotInput {
  std::span<const uint32_t> idx;

  void add_forward(const Tensor<T>& w, std::span<T> acc) const {
    auto a = as_evec(acc);
    for (uint32_t i : idx) {
      if (i >= w.rows()) throw std::invalid_argument("multi-hot index out of range");
      a += Eigen::Map<const typename Tensor<T>::EigenVec>(w.row(i), a.size());
    }
  }
  void add_grad(Tensor<T>& dw, std::span<const T> da) const {
    auto d = as_evec(da);
    for (uint32_t i : idx)
      Eigen::Map<typename Tensor<T>::EigenVec>(dw.row(i), d.size()) += d;
  }
  static constexpr bool has_input_grad = false;
  void add_input_grad(const Tensor<T>&, std::span<const T>) const {}
};

// Dense input (e.g. an embedded token); dx, when nonempty, receives the
// input gradient during backward.
template <typename T>
struct DenseInput {
  std::span<const T> x;
  std::span<T> dx = {};

  void add_forward(const Tensor<T>& w, std::span<T> acc) const {
    as_evec(acc).noalias() += w.mview().transpose() * as_evec(x);
  }
  void add_grad(Tensor<T>& dw, std::span<const T> da) const {
    dw.mview().noalias() += as_evec(x) * as_evec(da).transpose();
  }
  static constexpr bool has_input_grad = true;
  void add_input_grad(const Tensor<T>& w, std::span<const T> da) const {
    if (!dx.empty()) as_evec(dx).noalias() += w.mview() * as_evec(da);
  }
};

template <typename T>
struct GruStepCache {
  std::vector<T> h_prev, z, r, c;
};

// h_t = (1 - z) o h_prev + z o tanh(Wh x + Uh (r o h_prev) + bh),
// z and r are sigmoid gates of the usual affine maps of (x, h_prev).
template <typename T, typename Input>
void gru_step(const GruParams<T>& p, const Input& in, std::span<const T> h_prev,
              std::span<T> h_out, GruStepCache<T>* cache = nullptr) {
  const size_t d = p.hidden_dim;
  if (h_prev.size() != d || h_out.size() != d)
    throw std::invalid_argument("gru_step: hidden size mismatch");

  std::vector<T> az(p.bz.v), ar(p.br.v), ah(p.bh.v);
  in.add_forward(p.wz, az);
  in.add_forward(p.wr, ar);
  as_evec(std::span<T>(az)).noalias() += p.uz.mview().transpose() * as_evec(h_prev);
  as_evec(std::span<T>(ar)).noalias() += p.ur.mview().transpose() * as_evec(h_prev);

  std::vector<T> z(d), r(d), rh(d);
  for (size_t i = 0; i < d; ++i) {
    z[i] = sigmoid(az[i]);
    r[i] = sigmoid(ar[i]);
    rh[i] = r[i] * h_prev[i];
  }
  in.add_forward(p.wh, ah);
  as_evec(std::span<T>(ah)).noalias() += p.uh.mview().transpose() * as_evec(std::span<const T>(rh));

  std::vector<T> c(d);
  for (size_t i = 0; i < d; ++i) {
    c[i] = std::tanh(ah[i]);
    h_out[i] = (T(1) - z[i]) * h_prev[i] + z[i] * c[i];
  }
  if (cache) {
    cache->h_prev.assign(h_prev.begin(), h_prev.end());
    cache->z = std::move(z);
    cache->r = std::move(r);
    cache->c = std::move(c);
  }
}

template <typename T>
struct GruGrads : GruParams<T> {
  using GruParams<T>::GruParams;
  void zero() {
    for (Tensor<T>* m : {&this->wz, &this->wr, &this->wh, &this->uz, &this->ur, &this->uh,
                         &this->bz, &this->br, &this->bh})
      m->zero();
  }
};

// One step of backprop: consumes d(h_t), accumulates parameter gradients and
// writes d(h_prev) over dh. Input gradients go through in.add_input_grad.
template <typename T, typename Input>
void gru_step_backward(const GruParams<T>& p, const Input& in, const GruStepCache<T>& cache,
                       std::span<T> dh, GruGrads<T>& g) {
  const size_t d = p.hidden_dim;
  std::vector<T> dah(d), daz(d), dar(d), dh_prev(d), rh(d);
  for (size_t i = 0; i < d; ++i) {
    T z = cache.z[i], c = cache.c[i], hp = cache.h_prev[i];
    T dc = dh[i] * z;
    T dz = dh[i] * (c - hp);
    dh_prev[i] = dh[i] * (T(1) - z);
    dah[i] = dc * (T(1) - c * c);
    daz[i] = dz * z * (T(1) - z);
    rh[i] = cache.r[i] * hp;
  }
  // candidate path
  as_evec(std::span<T>(g.bh.span())).noalias() += as_evec(std::span<const T>(dah));
  in.add_grad(g.wh, dah);
  g.uh.mview().noalias() += as_evec(std::span<const T>(rh)) * as_evec(std::span<const T>(dah)).transpose();
  std::vector<T> drh(d);
  as_evec(std::span<T>(drh)).noalias() = p.uh.mview() * as_evec(std::span<const T>(dah));
  for (size_t i = 0; i < d; ++i) {
    T r = cache.r[i], hp = cache.h_prev[i];
    dar[i] = drh[i] * hp * r * (T(1) - r);
    dh_prev[i] += drh[i] * r;
  }
  // gates
  as_evec(std::span<T>(g.bz.span())).noalias() += as_evec(std::span<const T>(daz));
  as_evec(std::span<T>(g.br.span())).noalias() += as_evec(std::span<const T>(dar));
  in.add_grad(g.wz, daz);
  in.add_grad(g.wr, dar);
  auto hprev = as_evec(std::span<const T>(cache.h_prev));
  g.uz.mview().noalias() += hprev * as_evec(std::span<const T>(daz)).transpose();
  g.ur.mview().noalias() += hprev * as_evec(std::span<const T>(dar)).transpose();
  as_evec(std::span<T>(dh_prev)).noalias() += p.uz.mview() * as_evec(std::span<const T>(daz));
  as_evec(std::span<T>(dh_prev)).noalias() += p.ur.mview() * as_evec(std::span<const T>(dar));

  in.add_input_grad(p.wz, daz);
  in.add_input_grad(p.wr, dar);
  in.add_input_grad(p.wh, dah);

  std::copy(dh_prev.begin(), dh_prev.end(), dh.begin());
}

// Fold a whole sequence from h_0 = 0, keeping per-step caches for BPTT.
template <typename T, typename Input>
std::vector<T> gru_forward(const GruParams<T>& p, std::span<const Input> inputs,
                           std::vector<GruStepCache<T>>* caches = nullptr) {
  std::vector<T> h(p.hidden_dim, T(0));
  if (caches) caches->resize(inputs.size());
  std::vector<T> next(p.hidden_dim);
  for (size_t t = 0; t < inputs.size(); ++t) {
    gru_step(p, inputs[t], std::span<const T>(h), std::span<T>(next),
             caches ? &(*caches)[t] : nullptr);
    h.swap(next);
  }
  return h;
}

// Backprop through time over the cached forward pass; dh_final is the
// gradient w.r.t. the final hidden state.
template <typename T, typename Input>
void gru_backward(const GruParams<T>& p, std::span<const Input> inputs,
                  const std::vector<GruStepCache<T>>& caches, std::span<const T> dh_final,
                  GruGrads<T>& g) {
  if (inputs.size() != caches.size())
    throw std::invalid_argument("gru_backward: cache/sequence length mismatch");
  std::vector<T> dh(dh_final.begin(), dh_final.end());
  for (size_t t = inputs.size(); t-- > 0;)
    gru_step_backward(p, inputs[t], caches[t], std::span<T>(dh), g);
}

} // namespace mcsbn
