#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcsbn {

struct LabeledScore {
  double score = 0;
  int label = 0;       // 1 positive, 0 negative
  uint64_t tie_id = 0; // deterministic order among equal scores
};

// Probability that a random positive outscores a random negative; ties count
// one half (midrank method).
inline double auc(std::span<const LabeledScore> rows) {
  size_t npos = 0, nneg = 0;
  for (const auto& r : rows) (r.label ? npos : nneg)++;
  if (npos == 0 || nneg == 0)
    throw std::invalid_argument("auc: needs both classes");
  std::vector<const LabeledScore*> sorted;
  sorted.reserve(rows.size());
  for (const auto& r : rows) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](const LabeledScore* a, const LabeledScore* b) { return a->score < b->score; });
  double rank_sum_pos = 0;
  size_t i = 0;
  while (i < sorted.size()) {
    size_t j = i;
    while (j < sorted.size() && sorted[j]->score == sorted[i]->score) ++j;
    double midrank = 0.5 * static_cast<double>(i + 1 + j); // average of ranks i+1..j
    for (size_t k = i; k < j; ++k)
      if (sorted[k]->label) rank_sum_pos += midrank;
    i = j;
  }
  double np = static_cast<double>(npos), nn = static_cast<double>(nneg);
  return (rank_sum_pos - np * (np + 1) / 2.0) / (np * nn);
}

// Average precision: precision accumulated at each positive hit, in
// descending score order with ties broken by ascending tie_id.
inline double pr_auc(std::span<const LabeledScore> rows) {
  size_t npos = 0;
  for (const auto& r : rows) npos += r.label ? 1 : 0;
  if (npos == 0) throw std::invalid_argument("pr_auc: needs at least one positive");
  std::vector<const LabeledScore*> sorted;
  sorted.reserve(rows.size());
  for (const auto& r : rows) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(), [](const LabeledScore* a, const LabeledScore* b) {
    if (a->score != b->score) return a->score > b->score;
    return a->tie_id < b->tie_id;
  });
  double sum = 0;
  size_t hits = 0;
  for (size_t i = 0; i < sorted.size(); ++i) {
    if (!sorted[i]->label) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  return sum / static_cast<double>(npos);
}

struct RankedSample {
  uint32_t pos_rank = 0; // 1-based rank of the positive
  uint32_t n_candidates = 0;
};

inline double mrr(std::span<const RankedSample> samples) {
  if (samples.empty()) throw std::invalid_argument("mrr: empty sample set");
  double s = 0;
  for (const auto& r : samples) s += 1.0 / static_cast<double>(r.pos_rank);
  return s / static_cast<double>(samples.size());
}

inline double recall_at_k(std::span<const RankedSample> samples, uint32_t k) {
  if (k < 1) throw std::invalid_argument("recall_at_k: k must be >= 1");
  if (samples.empty()) throw std::invalid_argument("recall_at_k: empty sample set");
  size_t hit = 0;
  for (const auto& r : samples) hit += r.pos_rank <= k ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(samples.size());
}

struct AdvertiserScore {
  std::string advertiser;
  double score = 0;
  int label = 0;
};

// Data-size-weighted mean of per-advertiser AUCs; advertisers with a single
// class are excluded from both sums.
inline double adv_auc(std::span<const AdvertiserScore> rows) {
  std::map<std::string, std::vector<LabeledScore>> groups;
  for (const auto& r : rows) groups[r.advertiser].push_back({r.score, r.label, 0});
  double weighted = 0, weight = 0;
  for (auto& [adv, g] : groups) {
    size_t npos = 0;
    for (auto& r : g) npos += r.label ? 1 : 0;
    if (npos == 0 || npos == g.size()) continue;
    weighted += static_cast<double>(g.size()) * auc(g);
    weight += static_cast<double>(g.size());
  }
  if (weight == 0) throw std::invalid_argument("adv_auc: no advertiser with both classes");
  return weighted / weight;
}

// Relative information gain versus the constant empirical-rate predictor.
// Probabilities are clamped to [1e-6, 1 - 1e-6].
inline double rig(std::span<const int> labels, std::span<const double> probs) {
  if (labels.size() != probs.size() || labels.empty())
    throw std::invalid_argument("rig: labels/probs mismatch");
  size_t npos = 0;
  for (int y : labels) npos += y ? 1 : 0;
  if (npos == 0 || npos == labels.size())
    throw std::invalid_argument("rig: needs both classes");
  auto clamp = [](double p) { return std::min(1.0 - 1e-6, std::max(1e-6, p)); };
  const double n = static_cast<double>(labels.size());
  double ce_model = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    double p = clamp(probs[i]);
    ce_model -= labels[i] ? std::log(p) : std::log(1.0 - p);
  }
  ce_model /= n;
  double base = clamp(static_cast<double>(npos) / n);
  double ce_base = -(static_cast<double>(npos) / n) * std::log(base) -
                   (1.0 - static_cast<double>(npos) / n) * std::log(1.0 - base);
  return (ce_base - ce_model) / ce_base;
}

} // namespace mcsbn
