#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcsbn/featurize.hpp"
#include "mcsbn/ffn.hpp"
#include "mcsbn/gru.hpp"
#include "mcsbn/io.hpp"

namespace mcsbn {

enum class Variant : uint8_t {
  McSbn = 0,
  PoolLast = 1,
  PoolMax = 2,
  SeqMax = 3,
  SeqAvg = 4,
  SeqHid = 5,
  Bow = 6, // word-level tf-idf baseline; no learned parameters
};

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::McSbn: return "mcsbn";
    case Variant::PoolLast: return "pool-last";
    case Variant::PoolMax: return "pool-max";
    case Variant::SeqMax: return "seq-max";
    case Variant::SeqAvg: return "seq-avg";
    case Variant::SeqHid: return "seq-hid";
    case Variant::Bow: return "bow";
  }
  return "?";
}

inline bool parse_variant(std::string_view s, Variant& out) {
  for (Variant v : {Variant::McSbn, Variant::PoolLast, Variant::PoolMax, Variant::SeqMax,
                    Variant::SeqAvg, Variant::SeqHid, Variant::Bow})
    if (s == variant_name(v)) {
      out = v;
      return true;
    }
  return false;
}

inline bool variant_uses_gru(Variant v) {
  return v == Variant::McSbn || v == Variant::SeqMax || v == Variant::SeqAvg ||
         v == Variant::SeqHid;
}
inline bool variant_uses_attention(Variant v) {
  return v == Variant::McSbn || v == Variant::PoolLast || v == Variant::PoolMax;
}
inline bool variant_uses_session_nets(Variant v) {
  return v == Variant::PoolLast || v == Variant::PoolMax;
}

template <typename T>
struct UserVector {
  std::vector<T> h;                           // pooled user embedding
  std::array<T, kNumChannels> alphas{};       // channel weights (uniform for non-attention variants)
};

inline constexpr size_t kAttentionHidden = 64;

// Parameters of the user-side encoder. Only the fields live for `variant`
// are allocated; visit() exposes exactly those.
template <typename T>
struct UserEncoderParams {
  Variant variant = Variant::McSbn;
  size_t vocab_size = 0, dim = 0;
  std::array<GruParams<T>, kNumChannels> channel_grus; // one GRU per channel
  std::array<FfnParams<T>, kNumChannels> session_nets; // pool variants: per-channel session embedder
  FfnParams<T> attention;                              // g(.;theta): dim -> hidden -> 1
  Tensor<T> combine_w, combine_b;                      // seq-hid: (K*dim, dim), (dim)

  UserEncoderParams() = default;
  UserEncoderParams(Variant v, size_t vocab, size_t d, Rng& rng) : variant(v), vocab_size(vocab), dim(d) {
    if (variant_uses_gru(v))
      for (auto& g : channel_grus) {
        g = GruParams<T>(vocab, d);
        g.init(rng);
      }
    if (variant_uses_session_nets(v)) {
      const size_t dims[] = {vocab, d, d};
      const Act acts[] = {Act::Tanh, Act::Identity};
      for (auto& n : session_nets) n = FfnParams<T>::make(dims, acts, rng);
    }
    if (variant_uses_attention(v)) {
      const size_t dims[] = {d, kAttentionHidden, 1};
      const Act acts[] = {Act::Tanh, Act::Identity};
      attention = FfnParams<T>::make(dims, acts, rng);
    }
    if (v == Variant::SeqHid) {
      combine_w = Tensor<T>::mat(kNumChannels * d, d);
      combine_b = Tensor<T>::vec(d);
      combine_w.init_uniform(rng);
    }
  }

  void visit(NamedTensors<T>& out) {
    if (variant_uses_gru(variant))
      for (size_t k = 0; k < kNumChannels; ++k)
        channel_grus[k].visit(std::string("user.") + channel_name(static_cast<Channel>(k)) + ".gru",
                              out);
    if (variant_uses_session_nets(variant))
      for (size_t k = 0; k < kNumChannels; ++k)
        session_nets[k].visit(std::string("user.") + channel_name(static_cast<Channel>(k)) + ".sess",
                              out);
    if (variant_uses_attention(variant)) attention.visit("user.attention", out);
    if (variant == Variant::SeqHid) {
      out.push_back({"user.combine.w", &combine_w});
      out.push_back({"user.combine.b", &combine_b});
    }
  }
};

// ---- forward pieces ----

// Fold the channel GRU over the session sequence from h_0 = 0.
template <typename T>
std::vector<T> encode_channel(const GruParams<T>& gru, const ChannelSequence& seq,
                              std::vector<GruStepCache<T>>* caches = nullptr) {
  std::vector<MultiHotInput<T>> inputs;
  inputs.reserve(seq.sessions.size());
  for (const Session& s : seq.sessions)
    inputs.push_back({std::span<const uint32_t>(s.indices)});
  if (caches) caches->clear();
  return gru_forward(gru, std::span<const MultiHotInput<T>>(inputs), caches);
}

// Softmax over the attention-net scores, with max subtraction.
template <typename T>
std::array<T, kNumChannels> softmax_weights(const std::array<T, kNumChannels>& scores) {
  T mx = *std::max_element(scores.begin(), scores.end());
  std::array<T, kNumChannels> a{};
  T sum = T(0);
  for (size_t k = 0; k < kNumChannels; ++k) {
    a[k] = std::exp(scores[k] - mx);
    sum += a[k];
  }
  for (auto& x : a) x /= sum;
  return a;
}

template <typename T>
std::array<T, kNumChannels> attention_weights(const FfnParams<T>& attention,
                                              std::span<const std::vector<T>> states,
                                              std::array<T, kNumChannels>* g_out = nullptr,
                                              std::array<FfnCache<T>, kNumChannels>* caches = nullptr) {
  std::array<T, kNumChannels> g{};
  for (size_t k = 0; k < kNumChannels; ++k) {
    auto y = ffn_forward(attention, DenseInput<T>{std::span<const T>(states[k])},
                         caches ? &(*caches)[k] : nullptr);
    g[k] = y.at(0);
  }
  if (g_out) *g_out = g;
  return softmax_weights(g);
}

template <typename T>
UserVector<T> pool_user(std::span<const std::vector<T>> states,
                        const std::array<T, kNumChannels>& alphas) {
  const size_t d = states[0].size();
  UserVector<T> u;
  u.h.assign(d, T(0));
  u.alphas = alphas;
  for (size_t k = 0; k < kNumChannels; ++k)
    for (size_t i = 0; i < d; ++i) u.h[i] += alphas[k] * states[k][i];
  return u;
}

template <typename T>
struct UserForwardCache {
  std::array<std::vector<GruStepCache<T>>, kNumChannels> gru;
  std::array<std::vector<FfnCache<T>>, kNumChannels> sessions; // pool variants
  std::array<std::vector<std::vector<T>>, kNumChannels> session_embeds;
  std::array<std::vector<uint32_t>, kNumChannels> max_src; // pool-max: winning session per coord
  std::array<std::vector<T>, kNumChannels> states;         // per-channel representation
  std::array<FfnCache<T>, kNumChannels> att;
  std::array<T, kNumChannels> g{}, alphas{};
  std::vector<uint32_t> chan_src; // seq-max: winning channel per coord
};

// Per-channel representation for any learned variant, with caches for BPTT.
template <typename T>
void encode_channels(const UserEncoderParams<T>& p,
                     std::span<const ChannelSequence> seqs, UserForwardCache<T>& c) {
  const size_t d = p.dim;
  for (size_t k = 0; k < kNumChannels; ++k) {
    const ChannelSequence& seq = seqs[k];
    switch (p.variant) {
      case Variant::McSbn:
      case Variant::SeqMax:
      case Variant::SeqAvg:
      case Variant::SeqHid:
        c.states[k] = encode_channel(p.channel_grus[k], seq, &c.gru[k]);
        break;
      case Variant::PoolLast: {
        c.sessions[k].clear();
        if (seq.sessions.empty()) {
          c.states[k].assign(d, T(0));
        } else {
          c.sessions[k].resize(1);
          MultiHotInput<T> in{std::span<const uint32_t>(seq.sessions.back().indices)};
          c.states[k] = ffn_forward(p.session_nets[k], in, &c.sessions[k][0]);
        }
        break;
      }
      case Variant::PoolMax: {
        c.sessions[k].clear();
        c.session_embeds[k].clear();
        c.max_src[k].assign(d, 0);
        if (seq.sessions.empty()) {
          c.states[k].assign(d, T(0));
          break;
        }
        c.sessions[k].resize(seq.sessions.size());
        for (size_t j = 0; j < seq.sessions.size(); ++j) {
          MultiHotInput<T> in{std::span<const uint32_t>(seq.sessions[j].indices)};
          c.session_embeds[k].push_back(ffn_forward(p.session_nets[k], in, &c.sessions[k][j]));
        }
        c.states[k] = c.session_embeds[k][0];
        for (size_t j = 1; j < c.session_embeds[k].size(); ++j)
          for (size_t i = 0; i < d; ++i)
            if (c.session_embeds[k][j][i] > c.states[k][i]) {
              c.states[k][i] = c.session_embeds[k][j][i];
              c.max_src[k][i] = static_cast<uint32_t>(j);
            }
        break;
      }
      default:
        throw std::invalid_argument("encode_channels: variant has no learned encoder");
    }
  }
}

template <typename T>
UserVector<T> encode_user_variant(const UserEncoderParams<T>& p,
                                  std::span<const ChannelSequence> seqs,
                                  UserForwardCache<T>* cache = nullptr) {
  UserForwardCache<T> local;
  UserForwardCache<T>& c = cache ? *cache : local;
  encode_channels(p, seqs, c);
  const size_t d = p.dim;
  UserVector<T> u;
  const T uniform = T(1) / T(kNumChannels);
  switch (p.variant) {
    case Variant::McSbn:
    case Variant::PoolLast:
    case Variant::PoolMax: {
      c.alphas = attention_weights(p.attention, std::span<const std::vector<T>>(c.states.data(), kNumChannels),
                                   &c.g, &c.att);
      u = pool_user(std::span<const std::vector<T>>(c.states.data(), kNumChannels), c.alphas);
      break;
    }
    case Variant::SeqAvg: {
      c.alphas = {uniform, uniform, uniform};
      u = pool_user(std::span<const std::vector<T>>(c.states.data(), kNumChannels), c.alphas);
      break;
    }
    case Variant::SeqMax: {
      c.chan_src.assign(d, 0);
      u.h = c.states[0];
      for (size_t k = 1; k < kNumChannels; ++k)
        for (size_t i = 0; i < d; ++i)
          if (c.states[k][i] > u.h[i]) {
            u.h[i] = c.states[k][i];
            c.chan_src[i] = static_cast<uint32_t>(k);
          }
      u.alphas = {uniform, uniform, uniform};
      break;
    }
    case Variant::SeqHid: {
      u.h.assign(d, T(0));
      std::vector<T> concat(kNumChannels * d);
      for (size_t k = 0; k < kNumChannels; ++k)
        std::copy(c.states[k].begin(), c.states[k].end(), concat.begin() + k * d);
      auto y = as_evec(std::span<T>(u.h));
      y = p.combine_b.vview();
      y.noalias() += p.combine_w.mview().transpose() * as_evec(std::span<const T>(concat));
      u.alphas = {uniform, uniform, uniform};
      break;
    }
    default:
      throw std::invalid_argument("encode_user_variant: unknown variant");
  }
  return u;
}

// The MC-SBN encoder: per-channel GRU states combined by attention pooling.
template <typename T>
UserVector<T> encode_user(const UserEncoderParams<T>& p, std::span<const ChannelSequence> seqs) {
  if (p.variant != Variant::McSbn)
    throw std::invalid_argument("encode_user expects the attention variant");
  return encode_user_variant(p, seqs);
}

// ---- backward ----

template <typename T>
struct UserEncoderGrads {
  std::array<GruGrads<T>, kNumChannels> channel_grus;
  std::array<FfnGrads<T>, kNumChannels> session_nets;
  FfnGrads<T> attention;
  Tensor<T> combine_w, combine_b;

  static UserEncoderGrads like(const UserEncoderParams<T>& p) {
    UserEncoderGrads g;
    if (variant_uses_gru(p.variant))
      for (size_t k = 0; k < kNumChannels; ++k)
        g.channel_grus[k] = GruGrads<T>(p.channel_grus[k].input_dim, p.channel_grus[k].hidden_dim);
    if (variant_uses_session_nets(p.variant))
      for (size_t k = 0; k < kNumChannels; ++k)
        g.session_nets[k] = FfnGrads<T>::like(p.session_nets[k]);
    if (variant_uses_attention(p.variant)) g.attention = FfnGrads<T>::like(p.attention);
    if (p.variant == Variant::SeqHid) {
      g.combine_w = Tensor<T>(p.combine_w.shape);
      g.combine_b = Tensor<T>(p.combine_b.shape);
    }
    return g;
  }
};

template <typename T>
void channel_backward(const UserEncoderParams<T>& p, std::span<const ChannelSequence> seqs,
                      const UserForwardCache<T>& c, size_t k, std::span<const T> dstate,
                      UserEncoderGrads<T>& g) {
  const ChannelSequence& seq = seqs[k];
  switch (p.variant) {
    case Variant::McSbn:
    case Variant::SeqMax:
    case Variant::SeqAvg:
    case Variant::SeqHid: {
      if (seq.sessions.empty()) return; // h stays at the constant zero init
      std::vector<MultiHotInput<T>> inputs;
      for (const Session& s : seq.sessions) inputs.push_back({std::span<const uint32_t>(s.indices)});
      gru_backward(p.channel_grus[k], std::span<const MultiHotInput<T>>(inputs), c.gru[k], dstate,
                   g.channel_grus[k]);
      break;
    }
    case Variant::PoolLast: {
      if (seq.sessions.empty()) return;
      MultiHotInput<T> in{std::span<const uint32_t>(seq.sessions.back().indices)};
      ffn_backward(p.session_nets[k], in, c.sessions[k][0], dstate, g.session_nets[k]);
      break;
    }
    case Variant::PoolMax: {
      if (seq.sessions.empty()) return;
      const size_t d = p.dim;
      for (size_t j = 0; j < seq.sessions.size(); ++j) {
        std::vector<T> dj(d, T(0));
        bool any = false;
        for (size_t i = 0; i < d; ++i)
          if (c.max_src[k][i] == j && dstate[i] != T(0)) {
            dj[i] = dstate[i];
            any = true;
          }
        if (!any) continue;
        MultiHotInput<T> in{std::span<const uint32_t>(seq.sessions[j].indices)};
        ffn_backward(p.session_nets[k], in, c.sessions[k][j], std::span<const T>(dj),
                     g.session_nets[k]);
      }
      break;
    }
    default:
      break;
  }
}

// Backprop d(h_u) through pooling, attention, and the channel encoders.
template <typename T>
void user_backward(const UserEncoderParams<T>& p, std::span<const ChannelSequence> seqs,
                   const UserForwardCache<T>& c, std::span<const T> dhu,
                   UserEncoderGrads<T>& g) {
  const size_t d = p.dim;
  std::array<std::vector<T>, kNumChannels> dstates;
  for (auto& v : dstates) v.assign(d, T(0));

  switch (p.variant) {
    case Variant::McSbn:
    case Variant::PoolLast:
    case Variant::PoolMax: {
      std::array<T, kNumChannels> dalpha{};
      for (size_t k = 0; k < kNumChannels; ++k) {
        for (size_t i = 0; i < d; ++i) {
          dalpha[k] += dhu[i] * c.states[k][i];
          dstates[k][i] += c.alphas[k] * dhu[i];
        }
      }
      T inner = T(0);
      for (size_t k = 0; k < kNumChannels; ++k) inner += c.alphas[k] * dalpha[k];
      for (size_t k = 0; k < kNumChannels; ++k) {
        T dg = c.alphas[k] * (dalpha[k] - inner);
        const T dgv[1] = {dg};
        DenseInput<T> in{std::span<const T>(c.states[k]), std::span<T>(dstates[k])};
        ffn_backward(p.attention, in, c.att[k], std::span<const T>(dgv, 1), g.attention);
      }
      break;
    }
    case Variant::SeqAvg: {
      const T w = T(1) / T(kNumChannels);
      for (size_t k = 0; k < kNumChannels; ++k)
        for (size_t i = 0; i < d; ++i) dstates[k][i] = w * dhu[i];
      break;
    }
    case Variant::SeqMax: {
      for (size_t i = 0; i < d; ++i) dstates[c.chan_src[i]][i] = dhu[i];
      break;
    }
    case Variant::SeqHid: {
      std::vector<T> concat(kNumChannels * d);
      for (size_t k = 0; k < kNumChannels; ++k)
        std::copy(c.states[k].begin(), c.states[k].end(), concat.begin() + k * d);
      g.combine_w.mview().noalias() +=
          as_evec(std::span<const T>(concat)) * as_evec(dhu).transpose();
      as_evec(std::span<T>(g.combine_b.span())).noalias() += as_evec(dhu);
      std::vector<T> dconcat(kNumChannels * d);
      as_evec(std::span<T>(dconcat)).noalias() = p.combine_w.mview() * as_evec(dhu);
      for (size_t k = 0; k < kNumChannels; ++k)
        for (size_t i = 0; i < d; ++i) dstates[k][i] += dconcat[k * d + i];
      break;
    }
    default:
      throw std::invalid_argument("user_backward: unknown variant");
  }
  for (size_t k = 0; k < kNumChannels; ++k)
    channel_backward(p, seqs, c, k, std::span<const T>(dstates[k]), g);
}

// ---- incremental serving state ----

inline constexpr uint16_t kUserStateVersion = 1;
inline constexpr const char* kUserStateMagic = "MCSB";

struct UserChannelState {
  std::vector<float> hidden;          // committed GRU state
  std::vector<uint32_t> open_session; // sorted indices of the open (uncommitted) day
  int64_t watermark_day = kNoDay;     // day of the open session; earlier events are late
};

struct UserState {
  uint32_t dim = 0;
  std::array<UserChannelState, kNumChannels> ch;

  explicit UserState(uint32_t d = 0) : dim(d) {
    for (auto& c : ch) c.hidden.assign(d, 0.0f);
  }

  std::string serialize() const {
    BufWriter w;
    w.bytes(kUserStateMagic, 4);
    w.u16(kUserStateVersion);
    w.u32(kNumChannels);
    w.u32(dim);
    for (const auto& c : ch) {
      for (float x : c.hidden) w.f32(x);
      w.varint(c.open_session.size());
      for (uint32_t i : c.open_session) w.varint(i);
      w.i64(c.watermark_day);
    }
    return std::move(w.buf);
  }

  static UserState deserialize(std::string_view data) {
    BufReader r(data);
    r.expect_magic(kUserStateMagic, "user state");
    uint16_t ver = r.u16();
    if (ver != kUserStateVersion)
      throw std::runtime_error("unsupported user state version " + std::to_string(ver));
    uint32_t k = r.u32();
    if (k != kNumChannels) throw std::runtime_error("user state channel count mismatch");
    UserState s(r.u32());
    for (auto& c : s.ch) {
      for (auto& x : c.hidden) x = r.f32();
      c.open_session.resize(r.varint());
      for (auto& i : c.open_session) i = static_cast<uint32_t>(r.varint());
      c.watermark_day = r.i64();
    }
    if (r.remaining() != 0) throw std::runtime_error("trailing bytes in user state");
    return s;
  }
};

struct IngestItem {
  Channel channel = Channel::Page;
  int64_t day = 0;
  std::vector<uint32_t> indices; // token indices of one event
};

struct IncrementalResult {
  size_t sessions_committed = 0;
  size_t late_events = 0;
};

inline void merge_sorted(std::vector<uint32_t>& into, std::span<const uint32_t> add) {
  for (uint32_t i : add) {
    auto it = std::lower_bound(into.begin(), into.end(), i);
    if (it == into.end() || *it != i) into.insert(it, i);
  }
}

// Streaming form of encode_channel. Events on the watermark day merge into
// the open session; a later day first commits the open session with one
// gru_step. Items must be day-nondecreasing per channel; older days are
// counted as late and dropped.
inline IncrementalResult incremental_update(const UserEncoderParams<float>& p, UserState& s,
                                            std::span<const IngestItem> items) {
  if (!variant_uses_gru(p.variant))
    throw std::invalid_argument("incremental_update: variant has no incremental form");
  if (s.dim != p.dim) throw std::invalid_argument("incremental_update: state dim mismatch");
  IncrementalResult res;
  for (const IngestItem& it : items) {
    auto& cs = s.ch[static_cast<size_t>(it.channel)];
    if (cs.watermark_day != kNoDay && it.day < cs.watermark_day) {
      ++res.late_events;
      continue;
    }
    if (cs.watermark_day != kNoDay && it.day > cs.watermark_day && !cs.open_session.empty()) {
      std::vector<float> next(s.dim);
      MultiHotInput<float> in{std::span<const uint32_t>(cs.open_session)};
      gru_step(p.channel_grus[static_cast<size_t>(it.channel)], in,
               std::span<const float>(cs.hidden), std::span<float>(next));
      cs.hidden = std::move(next);
      cs.open_session.clear();
      ++res.sessions_committed;
    }
    cs.watermark_day = it.day;
    merge_sorted(cs.open_session, it.indices);
  }
  return res;
}

// Current user vector: a provisional (non-persisted) gru_step folds in any
// open session, then the variant's pooling applies.
inline UserVector<float> read_vector(const UserEncoderParams<float>& p, const UserState& s) {
  if (!variant_uses_gru(p.variant))
    throw std::invalid_argument("read_vector: variant has no incremental form");
  UserForwardCache<float> c;
  for (size_t k = 0; k < kNumChannels; ++k) {
    const auto& cs = s.ch[k];
    if (cs.open_session.empty()) {
      c.states[k] = cs.hidden;
    } else {
      c.states[k].resize(s.dim);
      MultiHotInput<float> in{std::span<const uint32_t>(cs.open_session)};
      gru_step(p.channel_grus[k], in, std::span<const float>(cs.hidden),
               std::span<float>(c.states[k]));
    }
  }
  auto states = std::span<const std::vector<float>>(c.states.data(), kNumChannels);
  UserVector<float> u;
  const float uniform = 1.0f / kNumChannels;
  switch (p.variant) {
    case Variant::McSbn:
      u = pool_user(states, attention_weights(p.attention, states));
      break;
    case Variant::SeqAvg:
      u = pool_user(states, {uniform, uniform, uniform});
      break;
    case Variant::SeqMax: {
      u.h = c.states[0];
      for (size_t k = 1; k < kNumChannels; ++k)
        for (size_t i = 0; i < u.h.size(); ++i) u.h[i] = std::max(u.h[i], c.states[k][i]);
      u.alphas = {uniform, uniform, uniform};
      break;
    }
    case Variant::SeqHid: {
      std::vector<float> concat(kNumChannels * s.dim);
      for (size_t k = 0; k < kNumChannels; ++k)
        std::copy(c.states[k].begin(), c.states[k].end(), concat.begin() + k * s.dim);
      u.h.assign(s.dim, 0.0f);
      auto y = as_evec(std::span<float>(u.h));
      y = p.combine_b.vview();
      y.noalias() += p.combine_w.mview().transpose() * as_evec(std::span<const float>(concat));
      u.alphas = {uniform, uniform, uniform};
      break;
    }
    default:
      throw std::invalid_argument("read_vector: unsupported variant");
  }
  return u;
}

} // namespace mcsbn
