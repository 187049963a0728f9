#pragma once

#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mcsbn/featurize.hpp"

namespace mcsbn {

// idf = ln((N+1)/(df+1)) + 1 over the training corpus; unseen tokens take
// df = 0.
struct IdfTable {
  std::unordered_map<std::string, double> idf;
  size_t n_docs = 0;

  double lookup(const std::string& tok) const {
    auto it = idf.find(tok);
    if (it != idf.end()) return it->second;
    return std::log(static_cast<double>(n_docs + 1)) + 1.0;
  }

  template <typename DocRange>
  static IdfTable build(const DocRange& docs) {
    IdfTable t;
    std::unordered_map<std::string, size_t> df;
    for (const auto& doc : docs) {
      ++t.n_docs;
      std::unordered_map<std::string, bool> seen;
      for (const auto& tok : tokenize(doc))
        if (seen.emplace(tok, true).second) ++df[tok];
    }
    for (auto& [tok, d] : df)
      t.idf[tok] = std::log(static_cast<double>(t.n_docs + 1) / static_cast<double>(d + 1)) + 1.0;
    return t;
  }
};

// Cosine similarity of tf-idf weighted term vectors; 0 when either side is
// empty. The word-level baseline, no learned parameters.
inline double bow_tfidf_score(std::span<const std::string> user_texts, std::string_view ad_text,
                              const IdfTable& idf) {
  std::unordered_map<std::string, double> u, a;
  for (const auto& text : user_texts)
    for (const auto& tok : tokenize(text)) u[tok] += 1.0;
  for (const auto& tok : tokenize(ad_text)) a[tok] += 1.0;
  if (u.empty() || a.empty()) return 0.0;
  double dot = 0, nu = 0, na = 0;
  for (auto& [tok, tf] : u) {
    double w = tf * idf.lookup(tok);
    u[tok] = w;
    nu += w * w;
  }
  for (auto& [tok, tf] : a) {
    double w = tf * idf.lookup(tok);
    na += w * w;
    auto it = u.find(tok);
    if (it != u.end()) dot += it->second * w;
  }
  if (nu == 0 || na == 0) return 0.0;
  return dot / (std::sqrt(nu) * std::sqrt(na));
}

} // namespace mcsbn
