#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcsbn/adam.hpp"
#include "mcsbn/logs.hpp"
#include "mcsbn/metrics.hpp"
#include "mcsbn/model.hpp"
#include "mcsbn/parallel.hpp"

namespace mcsbn {

struct TrainingExample {
  std::string user_id;
  int64_t anchor_ts = 0;
  std::array<ChannelSequence, kNumChannels> history; // clipped, withholding applied
  std::string positive_ad_id;
};

struct TrainConfig {
  size_t dim = 128;
  size_t batch = 512;
  size_t max_steps = 100000;
  size_t negatives = 10;
  int64_t delta_seconds = 3600;       // withholding window before the anchor
  uint32_t lookback_days = 14;
  size_t patience = 5;                // evaluations without improvement
  size_t eval_every = 500;            // steps between validation evaluations
  double validation_fraction = 0.05;  // split by user
  double eval_fraction = 0.1;         // users reserved for final evaluation
  double lr = 1e-3;
  size_t embed_dim = kWordEmbedDim;
  bool uniform_negatives = false;     // default: empirical ad frequency
  unsigned threads = 4;
  uint64_t seed = 1;

  void validate() const {
    if (dim == 0 || batch == 0 || negatives == 0 || lookback_days == 0 || patience == 0 ||
        eval_every == 0 || lr <= 0 || embed_dim == 0 || threads == 0)
      throw std::invalid_argument("train config: all fields must be positive");
    if (delta_seconds < 0) throw std::invalid_argument("train config: delta must be >= 0");
    if (!(validation_fraction > 0 && validation_fraction < 0.5))
      throw std::invalid_argument("train config: validation fraction must be in (0, 0.5)");
    if (!(eval_fraction >= 0 && eval_fraction < 0.5))
      throw std::invalid_argument("train config: eval fraction must be in [0, 0.5)");
  }

  nlohmann::json to_json() const {
    return {{"dim", dim},
            {"batch", batch},
            {"max_steps", max_steps},
            {"negatives", negatives},
            {"delta_seconds", delta_seconds},
            {"lookback_days", lookback_days},
            {"patience", patience},
            {"eval_every", eval_every},
            {"validation_fraction", validation_fraction},
            {"eval_fraction", eval_fraction},
            {"lr", lr},
            {"embed_dim", embed_dim},
            {"uniform_negatives", uniform_negatives},
            {"threads", threads},
            {"seed", seed}};
  }
  static TrainConfig from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.dim = j.value("dim", c.dim);
    c.batch = j.value("batch", c.batch);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.negatives = j.value("negatives", c.negatives);
    c.delta_seconds = j.value("delta_seconds", c.delta_seconds);
    c.lookback_days = j.value("lookback_days", c.lookback_days);
    c.patience = j.value("patience", c.patience);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
    c.eval_fraction = j.value("eval_fraction", c.eval_fraction);
    c.lr = j.value("lr", c.lr);
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.uniform_negatives = j.value("uniform_negatives", c.uniform_negatives);
    c.threads = j.value("threads", c.threads);
    c.seed = j.value("seed", c.seed);
    return c;
  }
};

// Users are split into train / validation / evaluation roles by a seeded
// hash of the user id, so every pipeline stage agrees on the partition.
enum class UserRole { Train, Val, Eval };

inline UserRole user_role(const std::string& user_id, uint64_t seed, double val_frac,
                          double eval_frac) {
  uint64_t basis = fnv1a64(std::string_view(reinterpret_cast<const char*>(&seed), 8));
  uint64_t h = mix64(fnv1a64(user_id, basis));
  double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  if (u < eval_frac) return UserRole::Eval;
  if (u < eval_frac + val_frac) return UserRole::Val;
  return UserRole::Train;
}

struct BuildExamplesStats {
  size_t positives = 0;
  size_t emitted = 0;
  size_t skipped_negative_label = 0;
};

// One example per positive interaction: clip_history then daily sessions per
// channel. Examples with empty history are still emitted.
inline std::vector<TrainingExample> build_examples(std::span<const Interaction> interactions,
                                                   std::span<const Event> events,
                                                   const Vocab& vocab, const TrainConfig& cfg,
                                                   BuildExamplesStats* stats = nullptr) {
  std::unordered_map<std::string, std::vector<Event>> by_user;
  for (const Event& e : events) by_user[e.user_id].push_back(e);
  for (auto& [_, v] : by_user)
    std::sort(v.begin(), v.end(), [](const Event& a, const Event& b) { return a.ts < b.ts; });

  BuildExamplesStats local;
  std::vector<TrainingExample> out;
  static const std::vector<Event> kNoEvents;
  for (const Interaction& it : interactions) {
    if (it.label != 1) {
      ++local.skipped_negative_label;
      continue;
    }
    ++local.positives;
    auto uit = by_user.find(it.user_id);
    const std::vector<Event>& uev = uit == by_user.end() ? kNoEvents : uit->second;
    auto clipped = clip_history(uev, it.ts, cfg.delta_seconds, cfg.lookback_days);
    TrainingExample ex;
    ex.user_id = it.user_id;
    ex.anchor_ts = it.ts;
    ex.positive_ad_id = it.ad_id;
    int64_t lo = it.ts - static_cast<int64_t>(cfg.lookback_days) * kSecondsPerDay;
    for (size_t k = 0; k < kNumChannels; ++k)
      ex.history[k] = segment_sessions(clipped, static_cast<Channel>(k), vocab, lo,
                                       it.ts - cfg.delta_seconds, cfg.lookback_days);
    out.push_back(std::move(ex));
    ++local.emitted;
  }
  if (stats) *stats = local;
  return out;
}

// Draws from the background ad distribution P(A): empirical frequency of
// ads in the training interactions, or uniform over the catalog.
class NegativeSampler {
public:
  NegativeSampler(const AdCatalog& catalog, std::span<const Interaction> train_interactions,
                  bool uniform) {
    std::vector<double> weights(catalog.size(), 0.0);
    if (uniform) {
      std::fill(weights.begin(), weights.end(), 1.0);
    } else {
      for (const Interaction& it : train_interactions) {
        if (it.label != 1) continue;
        auto iit = catalog.by_id.find(it.ad_id);
        if (iit != catalog.by_id.end()) weights[iit->second] += 1.0;
      }
    }
    cdf_.resize(weights.size());
    double acc = 0;
    for (size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      cdf_[i] = acc;
    }
    if (acc <= 0) throw std::invalid_argument("negative sampler: empty background distribution");
    positive_support_ = 0;
    for (double w : weights) positive_support_ += w > 0 ? 1 : 0;
  }

  size_t support() const { return positive_support_; }

  // k i.i.d. draws; any draw equal to the positive is redrawn
  std::vector<size_t> sample(Rng& rng, size_t positive_idx, size_t k) const {
    if (positive_support_ < 2 && k > 0)
      throw std::invalid_argument("negative sampler: catalog too small");
    std::vector<size_t> out;
    out.reserve(k);
    while (out.size() < k) {
      size_t pick = rng.pick_cdf(cdf_);
      if (pick == positive_idx) continue;
      out.push_back(pick);
    }
    return out;
  }

private:
  std::vector<double> cdf_;
  size_t positive_support_ = 0;
};

// ---- negative-sampling objective ----

template <typename T>
inline T softplus(T x) {
  return x > T(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename T>
struct NsLossResult {
  T loss = T(0);
  std::vector<T> d_user;
  std::vector<std::vector<T>> d_ads; // [0] = positive, then negatives
};

// loss = -log sigma(S+) - sum_i log sigma(-S-_i); exact gradients w.r.t.
// the user vector and every ad vector.
template <typename T>
NsLossResult<T> ns_loss(std::span<const T> user, std::span<const T> positive,
                        std::span<const std::vector<T>> negatives) {
  if (negatives.empty()) throw std::invalid_argument("ns_loss: needs k >= 1 negatives");
  const size_t d = user.size();
  NsLossResult<T> r;
  r.d_user.assign(d, T(0));
  r.d_ads.resize(1 + negatives.size());

  T s_pos = score(user, positive);
  if (!std::isfinite(static_cast<double>(s_pos)))
    throw std::runtime_error("ns_loss: non-finite score");
  r.loss += softplus(-s_pos);
  T dpos = sigmoid(s_pos) - T(1); // d loss / d S+
  r.d_ads[0].assign(d, T(0));
  for (size_t i = 0; i < d; ++i) {
    r.d_user[i] += dpos * positive[i];
    r.d_ads[0][i] = dpos * user[i];
  }
  for (size_t n = 0; n < negatives.size(); ++n) {
    std::span<const T> neg(negatives[n]);
    T s = score(user, neg);
    if (!std::isfinite(static_cast<double>(s)))
      throw std::runtime_error("ns_loss: non-finite score");
    r.loss += softplus(s);
    T dneg = sigmoid(s); // d loss / d S-
    r.d_ads[n + 1].assign(d, T(0));
    for (size_t i = 0; i < d; ++i) {
      r.d_user[i] += dneg * neg[i];
      r.d_ads[n + 1][i] = dneg * user[i];
    }
  }
  return r;
}

// Full forward + backward for one example; gradients accumulate into g.
template <typename T>
T example_backward(const ModelParams<T>& m, const TrainingExample& ex, const AdCatalog& catalog,
                   size_t positive_idx, std::span<const size_t> negative_idx, ModelGrads<T>& g) {
  UserForwardCache<T> ucache;
  auto seqs = std::span<const ChannelSequence>(ex.history.data(), kNumChannels);
  UserVector<T> u = encode_user_variant(m.user, seqs, &ucache);

  AdForwardCache<T> pos_cache;
  std::vector<T> pos_vec = encode_ad(m.ad, catalog.ads[positive_idx].tokens, &pos_cache);
  std::vector<AdForwardCache<T>> neg_caches(negative_idx.size());
  std::vector<std::vector<T>> neg_vecs(negative_idx.size());
  for (size_t i = 0; i < negative_idx.size(); ++i)
    neg_vecs[i] = encode_ad(m.ad, catalog.ads[negative_idx[i]].tokens, &neg_caches[i]);

  auto r = ns_loss(std::span<const T>(u.h), std::span<const T>(pos_vec),
                   std::span<const std::vector<T>>(neg_vecs));

  user_backward(m.user, seqs, ucache, std::span<const T>(r.d_user), g.user);
  ad_backward(m.ad, pos_cache, std::span<const T>(r.d_ads[0]), g.ad);
  for (size_t i = 0; i < negative_idx.size(); ++i)
    ad_backward(m.ad, neg_caches[i], std::span<const T>(r.d_ads[i + 1]), g.ad);
  return r.loss;
}

// ---- dataset file ----
// Self-contained featurized examples: vocab hash + featurization config +
// session indices. The training verbs consume this instead of raw logs.

inline constexpr const char* kDatasetMagic = "MCSBDSET";
inline constexpr uint16_t kDatasetVersion = 1;

inline std::string serialize_dataset(std::span<const TrainingExample> examples,
                                     uint64_t vocab_hash, const nlohmann::json& config_echo) {
  BufWriter w;
  w.bytes(kDatasetMagic, 8);
  w.u16(kDatasetVersion);
  w.u64(vocab_hash);
  w.str(config_echo.dump());
  w.u64(examples.size());
  for (const TrainingExample& ex : examples) {
    w.str(ex.user_id);
    w.i64(ex.anchor_ts);
    w.str(ex.positive_ad_id);
    for (const ChannelSequence& seq : ex.history) {
      w.varint(seq.sessions.size());
      for (const Session& s : seq.sessions) {
        w.i64(s.day);
        w.varint(s.indices.size());
        for (uint32_t i : s.indices) w.varint(i);
      }
    }
  }
  return std::move(w.buf);
}

struct Dataset {
  uint64_t vocab_hash = 0;
  nlohmann::json config_echo;
  std::vector<TrainingExample> examples;
};

inline Dataset load_dataset(const std::string& path) {
  std::string data = read_file(path);
  BufReader r(data);
  r.expect_magic(kDatasetMagic, "dataset");
  uint16_t ver = r.u16();
  if (ver != kDatasetVersion)
    throw std::runtime_error("unsupported dataset version " + std::to_string(ver));
  Dataset ds;
  ds.vocab_hash = r.u64();
  ds.config_echo = nlohmann::json::parse(r.str());
  ds.examples.resize(r.u64());
  for (TrainingExample& ex : ds.examples) {
    ex.user_id = r.str();
    ex.anchor_ts = r.i64();
    ex.positive_ad_id = r.str();
    for (size_t k = 0; k < kNumChannels; ++k) {
      ex.history[k].channel = static_cast<Channel>(k);
      ex.history[k].sessions.resize(r.varint());
      for (Session& s : ex.history[k].sessions) {
        s.day = r.i64();
        s.indices.resize(r.varint());
        for (uint32_t& i : s.indices) i = static_cast<uint32_t>(r.varint());
      }
    }
  }
  if (r.remaining() != 0) throw std::runtime_error("trailing bytes in dataset");
  return ds;
}

// ---- training loop ----

struct TrainReport {
  size_t steps = 0;
  size_t best_step = 0;
  double best_val_auc = 0;
  double initial_val_auc = 0;
  size_t train_examples = 0, val_examples = 0;
  size_t skipped_missing_ad = 0;
  bool early_stopped = false;
  std::vector<std::pair<size_t, double>> val_auc_history;
  std::vector<double> window_loss_history;

  nlohmann::json to_json() const {
    nlohmann::json h = nlohmann::json::array();
    for (auto& [s, a] : val_auc_history) h.push_back({{"step", s}, {"auc", a}});
    return {{"steps", steps},
            {"best_step", best_step},
            {"best_val_auc", best_val_auc},
            {"initial_val_auc", initial_val_auc},
            {"train_examples", train_examples},
            {"val_examples", val_examples},
            {"skipped_missing_ad", skipped_missing_ad},
            {"early_stopped", early_stopped},
            {"val_auc", h},
            {"window_loss", window_loss_history}};
  }
};

namespace detail {

// Validation AUC over frozen candidate sets: each validation example scores
// its positive against fixed sampled negatives, pooled into one AUC.
struct ValSet {
  std::vector<const TrainingExample*> examples;
  std::vector<size_t> positive_idx;
  std::vector<std::vector<size_t>> negatives;
};

inline constexpr size_t kValNegatives = 9;

template <typename T>
double validation_auc(const ModelParams<T>& m, const ValSet& val, const AdCatalog& catalog,
                      unsigned threads) {
  std::vector<LabeledScore> rows(val.examples.size() * (1 + kValNegatives));
  parallel_chunks(val.examples.size(), threads, [&](size_t b, size_t e, unsigned) {
    for (size_t i = b; i < e; ++i) {
      auto seqs = std::span<const ChannelSequence>(val.examples[i]->history.data(), kNumChannels);
      UserVector<T> u = encode_user_variant(m.user, seqs);
      size_t base = i * (1 + kValNegatives);
      auto pos = encode_ad(m.ad, catalog.ads[val.positive_idx[i]].tokens);
      rows[base] = {static_cast<double>(score(std::span<const T>(u.h), std::span<const T>(pos))),
                    1, base};
      for (size_t n = 0; n < val.negatives[i].size(); ++n) {
        auto neg = encode_ad(m.ad, catalog.ads[val.negatives[i][n]].tokens);
        rows[base + 1 + n] = {
            static_cast<double>(score(std::span<const T>(u.h), std::span<const T>(neg))), 0,
            base + 1 + n};
      }
    }
  });
  return auc(rows);
}

} // namespace detail

// Mini-batch Adam on the negative-sampling loss with user-level validation
// split, periodic validation AUC, and early stopping on patience. Returns
// the best-validation checkpoint. Deterministic for a fixed config
// (including thread count: per-thread partial gradients merge in thread
// order). The background distribution P(A) is the empirical positive-ad
// frequency over the training-role examples unless cfg.uniform_negatives.
template <typename T>
ModelParams<T> train(const std::vector<TrainingExample>& all_examples, const AdCatalog& catalog,
                     const Vocab& vocab, Variant variant, const TrainConfig& cfg,
                     TrainReport& report) {
  cfg.validate();
  if (all_examples.empty()) throw std::invalid_argument("train: no examples");
  if (variant == Variant::Bow) throw std::invalid_argument("train: bow has no parameters");

  // split by user; evaluation-role users never enter training.
  // positives whose ad is missing from the catalog are skipped and counted.
  std::vector<const TrainingExample*> train_ex;
  detail::ValSet val;
  for (const auto& ex : all_examples) {
    if (!catalog.by_id.count(ex.positive_ad_id)) {
      ++report.skipped_missing_ad;
      continue;
    }
    switch (user_role(ex.user_id, cfg.seed, cfg.validation_fraction, cfg.eval_fraction)) {
      case UserRole::Train: train_ex.push_back(&ex); break;
      case UserRole::Val: val.examples.push_back(&ex); break;
      case UserRole::Eval: break;
    }
  }
  if (train_ex.empty()) throw std::invalid_argument("train: no training-role examples");
  report.train_examples = train_ex.size();
  report.val_examples = val.examples.size();

  std::vector<Interaction> train_inter;
  for (const TrainingExample* ex : train_ex)
    train_inter.push_back({ex->user_id, ex->positive_ad_id, ex->anchor_ts, 1, {}});
  NegativeSampler sampler(catalog, train_inter, cfg.uniform_negatives);

  auto positive_index = [&](const TrainingExample& ex) {
    return catalog.by_id.at(ex.positive_ad_id);
  };

  // frozen validation candidates
  {
    Rng vrng(cfg.seed ^ 0x5eed0a1dULL);
    for (auto* ex : val.examples) {
      size_t pos = positive_index(*ex);
      val.positive_idx.push_back(pos);
      val.negatives.push_back(sampler.sample(vrng, pos, detail::kValNegatives));
    }
  }

  ModelParams<T> model(variant, vocab.size(), cfg.dim, cfg.seed, cfg.embed_dim);
  model.vocab_hash = vocab.hash();
  model.config_echo = cfg.to_json();
  model.config_echo["variant"] = variant_name(variant);

  auto named = model.tensors();
  std::vector<Tensor<T>*> param_ptrs;
  for (auto& [n, t] : named) param_ptrs.push_back(t);
  AdamConfig<T> acfg;
  acfg.lr = static_cast<T>(cfg.lr);
  AdamState<T> adam(param_ptrs, acfg);

  const unsigned threads = cfg.threads;
  std::vector<ModelGrads<T>> thread_grads;
  for (unsigned t = 0; t < threads; ++t) thread_grads.push_back(ModelGrads<T>::like(model));
  ModelGrads<T> total = ModelGrads<T>::like(model);

  auto eval_val = [&]() -> double {
    if (val.examples.empty()) return std::numeric_limits<double>::quiet_NaN();
    return detail::validation_auc(model, val, catalog, threads);
  };

  double best_auc = eval_val();
  report.initial_val_auc = best_auc;
  report.best_val_auc = best_auc;
  report.val_auc_history.push_back({0, best_auc});
  ModelParams<T> best = model;
  size_t evals_since_best = 0;

  Rng shuffle_rng(cfg.seed ^ 0x0bad5eedULL);
  Rng neg_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<size_t> order(train_ex.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  size_t cursor = order.size(); // trigger shuffle on first use

  double window_loss = 0;
  size_t window_count = 0;
  std::vector<double> thread_losses(threads, 0.0);

  size_t step = 0;
  for (; step < cfg.max_steps; ++step) {
    // assemble the batch and draw negatives sequentially for determinism
    size_t bsz = std::min(cfg.batch, train_ex.size());
    std::vector<const TrainingExample*> batch(bsz);
    std::vector<size_t> pos_idx(bsz);
    std::vector<std::vector<size_t>> neg_idx(bsz);
    for (size_t i = 0; i < bsz; ++i) {
      if (cursor >= order.size()) {
        for (size_t j = order.size(); j > 1; --j)
          std::swap(order[j - 1], order[shuffle_rng.uniform_int(j)]);
        cursor = 0;
      }
      batch[i] = train_ex[order[cursor++]];
      pos_idx[i] = positive_index(*batch[i]);
      neg_idx[i] = sampler.sample(neg_rng, pos_idx[i], cfg.negatives);
    }

    std::fill(thread_losses.begin(), thread_losses.end(), 0.0);
    parallel_chunks(bsz, threads, [&](size_t b, size_t e, unsigned tid) {
      zero_grads(model, thread_grads[tid]);
      for (size_t i = b; i < e; ++i)
        thread_losses[tid] += static_cast<double>(example_backward(
            model, *batch[i], catalog, pos_idx[i], std::span<const size_t>(neg_idx[i]),
            thread_grads[tid]));
    });

    double batch_loss = 0;
    for (double l : thread_losses) batch_loss += l;
    batch_loss /= static_cast<double>(bsz);
    if (!std::isfinite(batch_loss))
      throw std::runtime_error("train: non-finite loss at step " + std::to_string(step + 1));
    window_loss += batch_loss;
    ++window_count;

    zero_grads(model, total);
    unsigned used = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(bsz)));
    for (unsigned t = 0; t < used; ++t) accumulate_grads(model, total, thread_grads[t]);
    scale_grads(model, total, T(1) / static_cast<T>(bsz));

    auto grad_ptrs = grad_tensors(model, total);
    std::vector<const Tensor<T>*> cg(grad_ptrs.begin(), grad_ptrs.end());
    adam_update(adam, param_ptrs, cg);

    if ((step + 1) % cfg.eval_every == 0) {
      report.window_loss_history.push_back(window_loss / std::max<size_t>(1, window_count));
      window_loss = 0;
      window_count = 0;
      double a = eval_val();
      report.val_auc_history.push_back({step + 1, a});
      if (!std::isnan(a)) {
        if (a > best_auc) {
          best_auc = a;
          best = model;
          report.best_step = step + 1;
          evals_since_best = 0;
        } else if (++evals_since_best >= cfg.patience) {
          report.early_stopped = true;
          ++step;
          break;
        }
      }
    }
  }
  report.steps = step;
  report.best_val_auc = best_auc;
  ModelParams<T> result = val.examples.empty() ? std::move(model) : std::move(best);
  if (!result.all_finite()) throw std::runtime_error("train: non-finite parameters");
  result.config_echo["report"] = report.to_json();
  return result;
}

} // namespace mcsbn
