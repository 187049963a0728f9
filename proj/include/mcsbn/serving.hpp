#pragma once

#include <algorithm>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcsbn/ad_encoder.hpp"
#include "mcsbn/logs.hpp"
#include "mcsbn/model.hpp"
#include "mcsbn/parallel.hpp"
#include "mcsbn/store.hpp"
#include "mcsbn/training.hpp"
#include "mcsbn/user_encoder.hpp"

namespace mcsbn {

struct UpdateReport {
  size_t events_applied = 0;
  size_t users_touched = 0;
  size_t sessions_committed = 0;
  size_t late_events = 0;

  nlohmann::json to_json() const {
    return {{"events_applied", events_applied},
            {"users_touched", users_touched},
            {"sessions_committed", sessions_committed},
            {"late_events", late_events}};
  }
};

// The offline updater loop: group the batch per user, sort by time, fold
// into each user's incremental state, write everything back as one atomic
// batch. Late events (behind a user's per-channel watermark) are dropped
// and counted.
inline UpdateReport apply_event_batch(VectorStore& store, const ModelParams<float>& model,
                                      const Vocab& vocab, std::span<const Event> events) {
  uint64_t version = const_cast<ModelParams<float>&>(model).model_version();
  if (store.count() > 0 && store.model_version() != 0 && store.model_version() != version)
    throw std::runtime_error("store was written by a different model version");

  UpdateReport report;
  if (events.empty()) return report;

  std::map<std::string, std::vector<const Event*>> by_user;
  for (const Event& e : events) by_user[e.user_id].push_back(&e);

  int64_t max_ts = store.watermark();
  std::vector<std::pair<std::string, std::string>> batch;
  batch.reserve(by_user.size());
  for (auto& [user_id, evs] : by_user) {
    std::stable_sort(evs.begin(), evs.end(),
                     [](const Event* a, const Event* b) { return a->ts < b->ts; });
    UserState state(static_cast<uint32_t>(model.dim()));
    if (auto stored = store.get(user_id)) state = UserState::deserialize(*stored);
    std::vector<IngestItem> items;
    items.reserve(evs.size());
    for (const Event* e : evs) {
      std::set<uint32_t> idx;
      for (auto& tok : tokenize(e->text)) idx.insert(vocab.lookup(tok));
      items.push_back({e->channel, day_of(e->ts), std::vector<uint32_t>(idx.begin(), idx.end())});
      max_ts = std::max(max_ts, e->ts);
    }
    auto res = incremental_update(model.user, state, items);
    report.events_applied += evs.size() - res.late_events;
    report.sessions_committed += res.sessions_committed;
    report.late_events += res.late_events;
    ++report.users_touched;
    batch.emplace_back(user_id, state.serialize());
  }
  store.put_batch(batch, version, max_ts);
  return report;
}

// Unknown users produce the deterministic cold-start vector (all-zero
// channel states through the variant's pooling); corrupt records throw.
inline UserVector<float> get_user_vector(const VectorStore& store,
                                         const ModelParams<float>& model,
                                         const std::string& user_id) {
  UserState state(static_cast<uint32_t>(model.dim()));
  if (auto stored = store.get(user_id)) {
    try {
      state = UserState::deserialize(*stored);
    } catch (const std::exception& e) {
      throw std::runtime_error("corrupt state for user " + user_id + ": " + e.what());
    }
    if (state.dim != model.dim())
      throw std::runtime_error("stored state dim mismatch for user " + user_id);
  }
  return read_vector(model.user, state);
}

struct ScoredCandidate {
  std::string ad_id;
  float score = 0;
  uint32_t rank = 0;
};

struct ScoreDiagnostics {
  size_t invalid_candidates = 0;
};

// Encode candidates through the cache, score by dot product, return the
// top_k sorted by score descending with ties broken by ascending ad_id.
inline std::vector<ScoredCandidate> score_candidates(std::span<const float> user_vec,
                                                     std::span<const AdDoc> candidates,
                                                     AdCache& cache,
                                                     const AdEncoderParams<float>& params,
                                                     size_t top_k,
                                                     ScoreDiagnostics* diag = nullptr,
                                                     unsigned threads = 1) {
  if (candidates.empty()) throw std::invalid_argument("score_candidates: no candidates");
  if (top_k < 1) throw std::invalid_argument("score_candidates: top_k must be >= 1");
  std::vector<ScoredCandidate> scored(candidates.size());
  std::vector<uint8_t> valid(candidates.size(), 0);
  parallel_chunks(candidates.size(), threads, [&](size_t b, size_t e, unsigned) {
    for (size_t i = b; i < e; ++i) {
      const AdDoc& ad = candidates[i];
      if (ad.tokens.empty()) continue;
      auto vec = cached_encode(cache, params, ad.ad_id, ad.tokens);
      scored[i] = {ad.ad_id, score(user_vec, std::span<const float>(vec)), 0};
      valid[i] = 1;
    }
  });
  std::vector<ScoredCandidate> out;
  out.reserve(candidates.size());
  size_t invalid = 0;
  for (size_t i = 0; i < candidates.size(); ++i) {
    if (valid[i]) out.push_back(std::move(scored[i]));
    else ++invalid;
  }
  if (diag) diag->invalid_candidates = invalid;
  std::stable_sort(out.begin(), out.end(), [](const ScoredCandidate& a, const ScoredCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.ad_id < b.ad_id;
  });
  if (out.size() > top_k) out.resize(top_k);
  for (size_t i = 0; i < out.size(); ++i) out[i].rank = static_cast<uint32_t>(i + 1);
  return out;
}

struct ExportStats {
  size_t rows = 0;
  size_t missing_ads = 0;
};

// One CSV row per (user, ad) pair: h_u, h_a, and the similarity score,
// printed with 9 significant digits. Missing ads are skipped and counted.
inline ExportStats export_features(const VectorStore& store, const ModelParams<float>& model,
                                   const AdCatalog& catalog,
                                   std::span<const std::pair<std::string, std::string>> pairs,
                                   std::ostream& out) {
  const size_t d = model.dim();
  out << "user_id,ad_id";
  for (size_t i = 0; i < d; ++i) out << ",u_" << i;
  for (size_t i = 0; i < d; ++i) out << ",a_" << i;
  out << ",s\n";

  ExportStats stats;
  AdCache cache(/*capacity=*/4096, const_cast<ModelParams<float>&>(model).model_version());
  std::map<std::string, UserVector<float>> user_cache;
  for (const auto& [user_id, ad_id] : pairs) {
    const AdDoc* ad = catalog.find(ad_id);
    if (!ad || ad->tokens.empty()) {
      ++stats.missing_ads;
      continue;
    }
    auto uit = user_cache.find(user_id);
    if (uit == user_cache.end())
      uit = user_cache.emplace(user_id, get_user_vector(store, model, user_id)).first;
    auto ad_vec = cached_encode(cache, model.ad, ad_id, ad->tokens);
    float s = score(std::span<const float>(uit->second.h), std::span<const float>(ad_vec));
    out << user_id << ',' << ad_id;
    for (size_t i = 0; i < d; ++i) out << ',' << format_g9(uit->second.h[i]);
    for (size_t i = 0; i < d; ++i) out << ',' << format_g9(ad_vec[i]);
    out << ',' << format_g9(s) << '\n';
    ++stats.rows;
  }
  return stats;
}

} // namespace mcsbn
