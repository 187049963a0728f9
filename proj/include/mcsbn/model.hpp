#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcsbn/ad_encoder.hpp"
#include "mcsbn/io.hpp"
#include "mcsbn/user_encoder.hpp"

namespace mcsbn {

inline constexpr const char* kCheckpointMagic = "MCSBCKPT";
inline constexpr uint16_t kCheckpointVersion = 1;

// Everything trainable: the variant's user encoder plus the shared
// bi-GRU ad encoder.
template <typename T>
struct ModelParams {
  UserEncoderParams<T> user;
  AdEncoderParams<T> ad;
  nlohmann::json config_echo; // run configuration recorded at save time
  uint64_t vocab_hash = 0;

  ModelParams() = default;
  ModelParams(Variant variant, size_t vocab, size_t dim, uint64_t seed,
              size_t embed_dim = kWordEmbedDim) {
    Rng rng(seed);
    user = UserEncoderParams<T>(variant, vocab, dim, rng);
    if (variant != Variant::Bow) ad = AdEncoderParams<T>(vocab, dim, rng, embed_dim);
  }

  Variant variant() const { return user.variant; }
  size_t dim() const { return user.dim; }
  size_t vocab_size() const { return user.vocab_size; }

  NamedTensors<T> tensors() {
    NamedTensors<T> out;
    user.visit(out);
    if (user.variant != Variant::Bow) ad.visit(out);
    return out;
  }

  bool all_finite() {
    for (auto& [name, t] : tensors())
      if (!t->all_finite()) return false;
    return true;
  }

  // content hash used as the model version tag for caches and the store
  uint64_t model_version() {
    uint64_t h = fnv1a64(variant_name(user.variant));
    for (auto& [name, t] : tensors()) {
      h = fnv1a64(name, h);
      h = fnv1a64(std::string_view(reinterpret_cast<const char*>(t->data()),
                                   t->size() * sizeof(T)),
                  h);
    }
    return h;
  }
};

template <typename T>
struct ModelGrads {
  UserEncoderGrads<T> user;
  AdEncoderGrads<T> ad;

  static ModelGrads like(ModelParams<T>& p) {
    ModelGrads g;
    g.user = UserEncoderGrads<T>::like(p.user);
    g.ad = AdEncoderGrads<T>::like(p.ad);
    return g;
  }
};

// Gradient tensors in the same order as ModelParams::tensors(). The grads
// structs mirror the params structs, so walk them the same way.
template <typename T>
std::vector<Tensor<T>*> grad_tensors(const ModelParams<T>& p, ModelGrads<T>& g) {
  std::vector<Tensor<T>*> out;
  auto push_gru = [&out](GruGrads<T>& gg) {
    for (Tensor<T>* t : {&gg.wz, &gg.wr, &gg.wh, &gg.uz, &gg.ur, &gg.uh, &gg.bz, &gg.br, &gg.bh})
      out.push_back(t);
  };
  auto push_ffn = [&out](FfnGrads<T>& fg) {
    for (auto& l : fg.layers) {
      out.push_back(&l.w);
      out.push_back(&l.b);
    }
  };
  Variant v = p.user.variant;
  if (variant_uses_gru(v))
    for (size_t k = 0; k < kNumChannels; ++k) push_gru(g.user.channel_grus[k]);
  if (variant_uses_session_nets(v))
    for (size_t k = 0; k < kNumChannels; ++k) push_ffn(g.user.session_nets[k]);
  if (variant_uses_attention(v)) push_ffn(g.user.attention);
  if (v == Variant::SeqHid) {
    out.push_back(&g.user.combine_w);
    out.push_back(&g.user.combine_b);
  }
  out.push_back(&g.ad.word_emb);
  push_gru(g.ad.fwd);
  push_gru(g.ad.bwd);
  return out;
}

template <typename T>
void zero_grads(const ModelParams<T>& p, ModelGrads<T>& g) {
  for (Tensor<T>* t : grad_tensors(p, g)) t->zero();
}

// dst += src, tensor by tensor
template <typename T>
void accumulate_grads(const ModelParams<T>& p, ModelGrads<T>& dst, const ModelGrads<T>& src) {
  auto d = grad_tensors(p, dst);
  auto s = grad_tensors(p, const_cast<ModelGrads<T>&>(src));
  for (size_t i = 0; i < d.size(); ++i) {
    T* a = d[i]->data();
    const T* b = s[i]->data();
    for (size_t j = 0; j < d[i]->size(); ++j) a[j] += b[j];
  }
}

template <typename T>
void scale_grads(const ModelParams<T>& p, ModelGrads<T>& g, T factor) {
  for (Tensor<T>* t : grad_tensors(p, g))
    for (T& x : t->v) x *= factor;
}

// ---- checkpoint io ----
// magic, version, config-echo JSON, then a named tensor table.

template <typename T>
std::string serialize_checkpoint(ModelParams<T>& m) {
  BufWriter w;
  w.bytes(kCheckpointMagic, 8);
  w.u16(kCheckpointVersion);
  nlohmann::json echo = m.config_echo;
  echo["variant"] = variant_name(m.user.variant);
  echo["dim"] = m.user.dim;
  echo["vocab_size"] = m.user.vocab_size;
  echo["embed_dim"] = m.ad.embed_dim;
  echo["vocab_hash"] = m.vocab_hash;
  w.str(echo.dump());
  auto named = m.tensors();
  w.u32(static_cast<uint32_t>(named.size()));
  for (auto& [name, t] : named) {
    w.str(name);
    w.u32(static_cast<uint32_t>(t->shape.size()));
    for (size_t d : t->shape) w.u32(static_cast<uint32_t>(d));
    for (T x : t->v) w.f32(static_cast<float>(x));
  }
  return std::move(w.buf);
}

template <typename T>
void save_checkpoint(ModelParams<T>& m, const std::string& path) {
  write_file_atomic(path, serialize_checkpoint(m));
}

template <typename T = float>
ModelParams<T> load_checkpoint(const std::string& path) {
  std::string data = read_file(path);
  BufReader r(data);
  r.expect_magic(kCheckpointMagic, "checkpoint");
  uint16_t ver = r.u16();
  if (ver != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(ver));
  nlohmann::json echo = nlohmann::json::parse(r.str());
  Variant variant;
  if (!parse_variant(echo.at("variant").get<std::string>(), variant))
    throw std::runtime_error("checkpoint has unknown variant");
  size_t dim = echo.at("dim").get<size_t>();
  size_t vocab = echo.at("vocab_size").get<size_t>();
  size_t embed = echo.at("embed_dim").get<size_t>();

  ModelParams<T> m(variant, vocab, dim, /*seed=*/0, embed);
  m.config_echo = echo;
  m.vocab_hash = echo.value("vocab_hash", uint64_t{0});
  auto named = m.tensors();
  uint32_t count = r.u32();
  if (count != named.size())
    throw std::runtime_error("checkpoint tensor count mismatch: file has " +
                             std::to_string(count) + ", model expects " +
                             std::to_string(named.size()));
  for (auto& [name, t] : named) {
    std::string fname = r.str();
    if (fname != name)
      throw std::runtime_error("checkpoint tensor order mismatch at " + fname);
    uint32_t nd = r.u32();
    std::vector<size_t> shape(nd);
    for (auto& d : shape) d = r.u32();
    if (shape != t->shape) throw std::runtime_error("checkpoint shape mismatch for " + name);
    for (T& x : t->v) x = static_cast<T>(r.f32());
  }
  if (r.remaining() != 0) throw std::runtime_error("trailing bytes in checkpoint");
  return m;
}

} // namespace mcsbn
