#pragma once

#include <atomic>
#include <cstdint>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mcsbn/gru.hpp"
#include "mcsbn/tensor.hpp"

namespace mcsbn {

inline constexpr size_t kMaxAdTokens = 64; // ad copy is a few short sentences
inline constexpr size_t kWordEmbedDim = 64;

// Bi-directional GRU over embedded ad tokens; the two final states are
// concatenated, so each direction carries dim/2.
template <typename T>
struct AdEncoderParams {
  size_t vocab_size = 0, dim = 0, embed_dim = kWordEmbedDim;
  Tensor<T> word_emb; // (vocab, embed_dim)
  GruParams<T> fwd, bwd;

  AdEncoderParams() = default;
  AdEncoderParams(size_t vocab, size_t d, Rng& rng, size_t dw = kWordEmbedDim)
      : vocab_size(vocab), dim(d), embed_dim(dw) {
    if (d % 2 != 0) throw std::invalid_argument("ad encoder dim must be even");
    word_emb = Tensor<T>::mat(vocab, dw);
    word_emb.init_uniform(rng);
    fwd = GruParams<T>(dw, d / 2);
    bwd = GruParams<T>(dw, d / 2);
    fwd.init(rng);
    bwd.init(rng);
  }

  void visit(NamedTensors<T>& out) {
    out.push_back({"ad.word_emb", &word_emb});
    fwd.visit("ad.fwd", out);
    bwd.visit("ad.bwd", out);
  }
};

template <typename T>
struct AdForwardCache {
  std::vector<uint32_t> tokens; // after truncation
  std::vector<std::vector<T>> embeds;
  std::vector<GruStepCache<T>> fwd, bwd;
};

template <typename T>
std::vector<T> encode_ad(const AdEncoderParams<T>& p, std::span<const uint32_t> tokens,
                         AdForwardCache<T>* cache = nullptr) {
  if (tokens.empty()) throw std::invalid_argument("encode_ad: empty token list");
  size_t n = std::min(tokens.size(), kMaxAdTokens);
  std::vector<std::vector<T>> embeds(n);
  for (size_t i = 0; i < n; ++i) {
    if (tokens[i] >= p.vocab_size) throw std::invalid_argument("encode_ad: token out of range");
    const T* row = p.word_emb.row(tokens[i]);
    embeds[i].assign(row, row + p.embed_dim);
  }
  std::vector<DenseInput<T>> fw(n), bw(n);
  for (size_t i = 0; i < n; ++i) {
    fw[i].x = std::span<const T>(embeds[i]);
    bw[i].x = std::span<const T>(embeds[n - 1 - i]);
  }
  auto hf = gru_forward(p.fwd, std::span<const DenseInput<T>>(fw), cache ? &cache->fwd : nullptr);
  auto hb = gru_forward(p.bwd, std::span<const DenseInput<T>>(bw), cache ? &cache->bwd : nullptr);
  std::vector<T> h(p.dim);
  std::copy(hf.begin(), hf.end(), h.begin());
  std::copy(hb.begin(), hb.end(), h.begin() + hf.size());
  if (cache) {
    cache->tokens.assign(tokens.begin(), tokens.begin() + n);
    cache->embeds = std::move(embeds);
  }
  return h;
}

template <typename T>
struct AdEncoderGrads {
  Tensor<T> word_emb;
  GruGrads<T> fwd, bwd;

  static AdEncoderGrads like(const AdEncoderParams<T>& p) {
    AdEncoderGrads g;
    g.word_emb = Tensor<T>(p.word_emb.shape);
    g.fwd = GruGrads<T>(p.fwd.input_dim, p.fwd.hidden_dim);
    g.bwd = GruGrads<T>(p.bwd.input_dim, p.bwd.hidden_dim);
    return g;
  }
};

template <typename T>
void ad_backward(const AdEncoderParams<T>& p, const AdForwardCache<T>& cache,
                 std::span<const T> dh, AdEncoderGrads<T>& g) {
  const size_t n = cache.tokens.size();
  const size_t half = p.dim / 2;
  std::vector<std::vector<T>> dembeds(n, std::vector<T>(p.embed_dim, T(0)));
  std::vector<DenseInput<T>> fw(n), bw(n);
  for (size_t i = 0; i < n; ++i) {
    fw[i].x = std::span<const T>(cache.embeds[i]);
    fw[i].dx = std::span<T>(dembeds[i]);
    bw[i].x = std::span<const T>(cache.embeds[n - 1 - i]);
    bw[i].dx = std::span<T>(dembeds[n - 1 - i]);
  }
  gru_backward(p.fwd, std::span<const DenseInput<T>>(fw), cache.fwd, dh.subspan(0, half), g.fwd);
  gru_backward(p.bwd, std::span<const DenseInput<T>>(bw), cache.bwd, dh.subspan(half, half),
               g.bwd);
  for (size_t i = 0; i < n; ++i) {
    T* row = g.word_emb.row(cache.tokens[i]);
    for (size_t j = 0; j < p.embed_dim; ++j) row[j] += dembeds[i][j];
  }
}

// Dot-product similarity between user and ad embeddings.
template <typename T>
T score(std::span<const T> user_vec, std::span<const T> ad_vec) {
  if (user_vec.size() != ad_vec.size())
    throw std::invalid_argument("score: dimension mismatch");
  T s = T(0);
  for (size_t i = 0; i < user_vec.size(); ++i) s += user_vec[i] * ad_vec[i];
  return s;
}

// Bounded LRU cache of ad vectors, keyed by ad_id and tagged with the model
// version; a version bump invalidates on the next lookup. Lookups take a
// shared lock; inserts and recency updates are serialized.
class AdCache {
public:
  explicit AdCache(size_t capacity, uint64_t model_version = 0)
      : capacity_(capacity), model_version_(model_version) {}

  uint64_t model_version() const { return model_version_; }
  void set_model_version(uint64_t v) {
    std::unique_lock lock(mu_);
    model_version_ = v;
  }

  std::optional<std::vector<float>> get(const std::string& ad_id) {
    std::shared_lock lock(mu_);
    auto it = entries_.find(ad_id);
    if (it == entries_.end() || it->second.version != model_version_) return std::nullopt;
    it->second.stamp = ++clock_;
    return it->second.vec;
  }

  void put(const std::string& ad_id, std::vector<float> vec) {
    std::unique_lock lock(mu_);
    auto it = entries_.find(ad_id);
    if (it != entries_.end()) {
      it->second = {std::move(vec), model_version_, ++clock_};
      return;
    }
    if (capacity_ > 0 && entries_.size() >= capacity_) evict_lru();
    entries_[ad_id] = {std::move(vec), model_version_, ++clock_};
  }

  size_t size() const {
    std::shared_lock lock(mu_);
    return entries_.size();
  }

private:
  struct Entry {
    std::vector<float> vec;
    uint64_t version = 0;
    uint64_t stamp = 0;
  };

  void evict_lru() {
    auto victim = entries_.begin();
    for (auto it = entries_.begin(); it != entries_.end(); ++it)
      if (it->second.stamp < victim->second.stamp) victim = it;
    entries_.erase(victim);
  }

  size_t capacity_;
  uint64_t model_version_;
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, Entry> entries_;
  std::atomic<uint64_t> clock_{0};
};

// Cache-through encode. Errors from encode_ad propagate and are never cached.
inline std::vector<float> cached_encode(AdCache& cache, const AdEncoderParams<float>& p,
                                        const std::string& ad_id,
                                        std::span<const uint32_t> tokens,
                                        size_t* encoder_calls = nullptr) {
  if (auto hit = cache.get(ad_id)) return *hit;
  auto vec = encode_ad(p, tokens);
  if (encoder_calls) ++*encoder_calls;
  cache.put(ad_id, vec);
  return vec;
}

} // namespace mcsbn
