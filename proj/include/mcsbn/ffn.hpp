#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcsbn/gru.hpp"
#include "mcsbn/tensor.hpp"

namespace mcsbn {

enum class Act : uint8_t { Identity = 0, Tanh = 1 };

template <typename T>
struct FfnLayer {
  Tensor<T> w; // (in, out), input-major
  Tensor<T> b; // (out)
  Act act = Act::Identity;
};

template <typename T>
struct FfnParams {
  std::vector<FfnLayer<T>> layers;

  static FfnParams make(std::span<const size_t> dims, std::span<const Act> acts, Rng& rng) {
    if (dims.size() < 2 || acts.size() != dims.size() - 1)
      throw std::invalid_argument("ffn: dims/acts mismatch");
    FfnParams p;
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
      FfnLayer<T> layer;
      layer.w = Tensor<T>::mat(dims[l], dims[l + 1]);
      layer.b = Tensor<T>::vec(dims[l + 1]);
      layer.act = acts[l];
      layer.w.init_uniform(rng);
      p.layers.push_back(std::move(layer));
    }
    return p;
  }

  size_t in_dim() const { return layers.front().w.rows(); }
  size_t out_dim() const { return layers.back().w.cols(); }

  void visit(const std::string& prefix, NamedTensors<T>& out) {
    for (size_t l = 0; l < layers.size(); ++l) {
      out.push_back({prefix + ".l" + std::to_string(l) + ".w", &layers[l].w});
      out.push_back({prefix + ".l" + std::to_string(l) + ".b", &layers[l].b});
    }
  }
};

template <typename T>
struct FfnCache {
  // post-activation output of each layer
  std::vector<std::vector<T>> outs;
};

template <typename T>
inline void apply_act(Act act, std::span<T> x) {
  if (act == Act::Tanh)
    for (T& v : x) v = std::tanh(v);
}

// First layer accepts either a dense vector or a multi-hot input adapter.
template <typename T, typename Input>
std::vector<T> ffn_forward(const FfnParams<T>& p, const Input& in, FfnCache<T>* cache = nullptr) {
  if (cache) cache->outs.clear();
  std::vector<T> cur;
  for (size_t l = 0; l < p.layers.size(); ++l) {
    const auto& layer = p.layers[l];
    std::vector<T> next(layer.b.v);
    if (l == 0) {
      in.add_forward(layer.w, next);
    } else {
      if (cur.size() != layer.w.rows()) throw std::invalid_argument("ffn: dimension mismatch");
      DenseInput<T>{std::span<const T>(cur)}.add_forward(layer.w, next);
    }
    apply_act(layer.act, std::span<T>(next));
    if (cache) cache->outs.push_back(next);
    cur = std::move(next);
  }
  return cur;
}

template <typename T>
std::vector<T> ffn_forward(const FfnParams<T>& p, std::span<const T> x) {
  return ffn_forward(p, DenseInput<T>{x}, static_cast<FfnCache<T>*>(nullptr));
}

template <typename T>
struct FfnGrads {
  std::vector<FfnLayer<T>> layers; // same shapes, act unused

  static FfnGrads like(const FfnParams<T>& p) {
    FfnGrads g;
    for (const auto& l : p.layers) {
      FfnLayer<T> gl;
      gl.w = Tensor<T>::mat(l.w.rows(), l.w.cols());
      gl.b = Tensor<T>::vec(l.b.size());
      g.layers.push_back(std::move(gl));
    }
    return g;
  }
  void zero() {
    for (auto& l : layers) {
      l.w.zero();
      l.b.zero();
    }
  }
};

// dout is the gradient w.r.t. the network output; the gradient w.r.t. the
// first-layer input flows through in.add_input_grad.
template <typename T, typename Input>
void ffn_backward(const FfnParams<T>& p, const Input& in, const FfnCache<T>& cache,
                  std::span<const T> dout, FfnGrads<T>& g) {
  if (cache.outs.size() != p.layers.size())
    throw std::invalid_argument("ffn_backward: cache mismatch");
  std::vector<T> d(dout.begin(), dout.end());
  for (size_t l = p.layers.size(); l-- > 0;) {
    const auto& layer = p.layers[l];
    const auto& out = cache.outs[l];
    if (layer.act == Act::Tanh)
      for (size_t i = 0; i < d.size(); ++i) d[i] *= (T(1) - out[i] * out[i]);
    as_evec(std::span<T>(g.layers[l].b.span())).noalias() += as_evec(std::span<const T>(d));
    if (l == 0) {
      in.add_grad(g.layers[l].w, d);
      in.add_input_grad(layer.w, d);
    } else {
      DenseInput<T> din{std::span<const T>(cache.outs[l - 1])};
      din.add_grad(g.layers[l].w, d);
      std::vector<T> dprev(layer.w.rows(), T(0));
      as_evec(std::span<T>(dprev)).noalias() = layer.w.mview() * as_evec(std::span<const T>(d));
      d = std::move(dprev);
    }
  }
}

} // namespace mcsbn
