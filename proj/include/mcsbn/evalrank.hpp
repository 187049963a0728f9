#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcsbn/bow.hpp"
#include "mcsbn/metrics.hpp"
#include "mcsbn/parallel.hpp"
#include "mcsbn/training.hpp"

namespace mcsbn {

struct EvalExample {
  TrainingExample ex;
  size_t positive_idx = 0;             // catalog index of the true positive
  std::vector<std::string> user_texts; // raw clipped event texts (word-level baseline)
};

struct BuildEvalStats {
  size_t positives = 0;
  size_t missing_ads = 0;
};

// Candidate-set evaluation examples from positive interactions; history is
// clipped and segmented exactly as in training.
inline std::vector<EvalExample> build_eval_examples(std::span<const Interaction> interactions,
                                                    std::span<const Event> events,
                                                    const Vocab& vocab, const AdCatalog& catalog,
                                                    const TrainConfig& cfg, bool keep_texts,
                                                    BuildEvalStats* stats = nullptr) {
  std::unordered_map<std::string, std::vector<Event>> by_user;
  for (const Event& e : events) by_user[e.user_id].push_back(e);
  for (auto& [_, v] : by_user)
    std::sort(v.begin(), v.end(), [](const Event& a, const Event& b) { return a.ts < b.ts; });

  BuildEvalStats local;
  std::vector<EvalExample> out;
  static const std::vector<Event> kNoEvents;
  for (const Interaction& it : interactions) {
    if (it.label != 1) continue;
    ++local.positives;
    auto cit = catalog.by_id.find(it.ad_id);
    if (cit == catalog.by_id.end()) {
      ++local.missing_ads;
      continue;
    }
    auto uit = by_user.find(it.user_id);
    const std::vector<Event>& uev = uit == by_user.end() ? kNoEvents : uit->second;
    auto clipped = clip_history(uev, it.ts, cfg.delta_seconds, cfg.lookback_days);
    EvalExample ee;
    ee.ex.user_id = it.user_id;
    ee.ex.anchor_ts = it.ts;
    ee.ex.positive_ad_id = it.ad_id;
    ee.positive_idx = cit->second;
    int64_t lo = it.ts - static_cast<int64_t>(cfg.lookback_days) * kSecondsPerDay;
    for (size_t k = 0; k < kNumChannels; ++k)
      ee.ex.history[k] = segment_sessions(clipped, static_cast<Channel>(k), vocab, lo,
                                          it.ts - cfg.delta_seconds, cfg.lookback_days);
    if (keep_texts)
      for (const Event& e : clipped) ee.user_texts.push_back(e.text);
    out.push_back(std::move(ee));
  }
  if (stats) *stats = local;
  return out;
}

struct MetricsReport {
  double auc = 0, pr_auc = 0, mrr = 0, recall1 = 0, recall3 = 0, adv_auc = 0, rig = 0;
  std::array<double, kNumChannels> mean_attention{};
  bool has_attention = false;
  size_t samples = 0;
  size_t negatives_per_positive = 0;

  nlohmann::json to_json() const {
    nlohmann::json j{{"auc", auc},         {"pr_auc", pr_auc}, {"mrr", mrr},
                     {"recall_at_1", recall1}, {"recall_at_3", recall3},
                     {"adv_auc", adv_auc}, {"rig", rig},       {"samples", samples},
                     {"negatives_per_positive", negatives_per_positive}};
    if (has_attention) {
      j["mean_attention"] = {{"page", mean_attention[0]},
                             {"query", mean_attention[1]},
                             {"ad_click", mean_attention[2]}};
    }
    return j;
  }
  static const char* csv_header() {
    return "auc,pr_auc,mrr,recall_at_1,recall_at_3,adv_auc,rig,samples";
  }
  std::string csv_row() const {
    std::string s;
    for (double v : {auc, pr_auc, mrr, recall1, recall3, adv_auc, rig}) {
      s += format_g9(v);
      s += ',';
    }
    s += std::to_string(samples);
    return s;
  }
};

// Scores the candidate list of one evaluation sample; cand_idx[0] is the
// positive. Implementations must be deterministic per sample index and safe
// to call concurrently on distinct samples.
class RankScorer {
public:
  virtual ~RankScorer() = default;
  virtual void score_sample(size_t sample_idx, const EvalExample& ex,
                            std::span<const size_t> cand_idx, std::span<double> out,
                            std::array<double, kNumChannels>* alphas) = 0;
};

class ModelScorer : public RankScorer {
public:
  ModelScorer(const ModelParams<float>& model, const AdCatalog& catalog, unsigned threads = 1)
      : model_(model), ad_vecs_(catalog.size()) {
    parallel_chunks(catalog.size(), threads, [&](size_t b, size_t e, unsigned) {
      for (size_t i = b; i < e; ++i)
        if (!catalog.ads[i].tokens.empty()) ad_vecs_[i] = encode_ad(model.ad, catalog.ads[i].tokens);
    });
  }

  void score_sample(size_t, const EvalExample& ex, std::span<const size_t> cand_idx,
                    std::span<double> out, std::array<double, kNumChannels>* alphas) override {
    auto seqs = std::span<const ChannelSequence>(ex.ex.history.data(), kNumChannels);
    UserVector<float> u = encode_user_variant(model_.user, seqs);
    for (size_t i = 0; i < cand_idx.size(); ++i)
      out[i] = static_cast<double>(
          score(std::span<const float>(u.h), std::span<const float>(ad_vecs_[cand_idx[i]])));
    if (alphas) {
      if (variant_uses_attention(model_.user.variant))
        for (size_t k = 0; k < kNumChannels; ++k) (*alphas)[k] = u.alphas[k];
      else
        alphas->fill(std::nan(""));
    }
  }

private:
  const ModelParams<float>& model_;
  std::vector<std::vector<float>> ad_vecs_;
};

class BowScorer : public RankScorer {
public:
  BowScorer(IdfTable idf, const AdCatalog& catalog) : idf_(std::move(idf)), catalog_(catalog) {}

  void score_sample(size_t, const EvalExample& ex, std::span<const size_t> cand_idx,
                    std::span<double> out, std::array<double, kNumChannels>* alphas) override {
    for (size_t i = 0; i < cand_idx.size(); ++i)
      out[i] = bow_tfidf_score(ex.user_texts, catalog_.ads[cand_idx[i]].text, idf_);
    if (alphas) alphas->fill(std::nan(""));
  }

private:
  IdfTable idf_;
  const AdCatalog& catalog_;
};

// Uniform scores, seeded per sample index: the harness-calibration scorer.
class RandomScorer : public RankScorer {
public:
  explicit RandomScorer(uint64_t seed) : seed_(seed) {}

  void score_sample(size_t sample_idx, const EvalExample&, std::span<const size_t> cand_idx,
                    std::span<double> out, std::array<double, kNumChannels>* alphas) override {
    Rng rng(mix64(seed_ ^ (0x9e3779b97f4a7c15ULL * (sample_idx + 1))));
    for (size_t i = 0; i < cand_idx.size(); ++i) out[i] = rng.uniform();
    if (alphas) alphas->fill(std::nan(""));
  }

private:
  uint64_t seed_;
};

// Candidate-set protocol: each positive is ranked against m negatives drawn
// uniformly from the catalog (positive excluded). Global metrics pool all
// candidates; user metrics are per-sample with ties broken by ascending
// ad_id.
inline MetricsReport evaluate_ranking(RankScorer& scorer, std::span<const EvalExample> examples,
                                      const AdCatalog& catalog, size_t m, uint64_t seed,
                                      unsigned threads = 1) {
  if (m < 1) throw std::invalid_argument("evaluate_ranking: m must be >= 1");
  if (examples.empty()) throw std::invalid_argument("evaluate_ranking: no examples");
  if (catalog.size() < 2) throw std::invalid_argument("evaluate_ranking: catalog too small");

  const size_t c = m + 1;
  std::vector<std::vector<size_t>> cands(examples.size());
  {
    Rng rng(mix64(seed ^ 0xeba1ULL));
    for (size_t i = 0; i < examples.size(); ++i) {
      cands[i].push_back(examples[i].positive_idx);
      while (cands[i].size() < c) {
        size_t pick = rng.uniform_int(catalog.size());
        if (pick != examples[i].positive_idx) cands[i].push_back(pick);
      }
    }
  }

  std::vector<double> scores(examples.size() * c);
  std::vector<std::array<double, kNumChannels>> alphas(examples.size());
  parallel_chunks(examples.size(), threads, [&](size_t b, size_t e, unsigned) {
    for (size_t i = b; i < e; ++i)
      scorer.score_sample(i, examples[i], cands[i],
                          std::span<double>(scores.data() + i * c, c), &alphas[i]);
  });

  std::vector<LabeledScore> pooled;
  pooled.reserve(examples.size() * c);
  std::vector<AdvertiserScore> adv_rows;
  adv_rows.reserve(examples.size() * c);
  std::vector<int> labels;
  std::vector<double> probs;
  std::vector<RankedSample> ranks(examples.size());
  for (size_t i = 0; i < examples.size(); ++i) {
    uint32_t rank = 1;
    const double pos_score = scores[i * c];
    const std::string& pos_id = catalog.ads[cands[i][0]].ad_id;
    for (size_t j = 0; j < c; ++j) {
      double s = scores[i * c + j];
      int label = j == 0 ? 1 : 0;
      pooled.push_back({s, label, i * c + j});
      adv_rows.push_back({catalog.ads[cands[i][j]].advertiser_id, s, label});
      labels.push_back(label);
      probs.push_back(1.0 / (1.0 + std::exp(-s)));
      if (j > 0) {
        const std::string& id = catalog.ads[cands[i][j]].ad_id;
        if (s > pos_score || (s == pos_score && id < pos_id)) ++rank;
      }
    }
    ranks[i] = {rank, static_cast<uint32_t>(c)};
  }

  MetricsReport r;
  r.samples = examples.size();
  r.negatives_per_positive = m;
  r.auc = auc(pooled);
  r.pr_auc = pr_auc(pooled);
  r.mrr = mrr(ranks);
  r.recall1 = recall_at_k(ranks, 1);
  r.recall3 = recall_at_k(ranks, 3);
  r.adv_auc = adv_auc(adv_rows);
  r.rig = rig(labels, probs);
  size_t with_attention = 0;
  std::array<double, kNumChannels> acc{};
  for (auto& a : alphas) {
    if (std::isnan(a[0])) continue;
    ++with_attention;
    for (size_t k = 0; k < kNumChannels; ++k) acc[k] += a[k];
  }
  if (with_attention > 0) {
    r.has_attention = true;
    for (size_t k = 0; k < kNumChannels; ++k)
      r.mean_attention[k] = acc[k] / static_cast<double>(with_attention);
  }
  return r;
}

} // namespace mcsbn
