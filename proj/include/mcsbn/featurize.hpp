#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mcsbn/io.hpp"

namespace mcsbn {

enum class Channel : uint8_t { Page = 0, Query = 1, AdClick = 2 };
inline constexpr size_t kNumChannels = 3;
inline constexpr int64_t kSecondsPerDay = 86400;
inline constexpr int64_t kNoDay = INT64_MIN;
inline constexpr uint32_t kDefaultSessionWindow = 14; // daily sessions, two-week lookback

inline const char* channel_name(Channel c) {
  switch (c) {
    case Channel::Page: return "page";
    case Channel::Query: return "query";
    case Channel::AdClick: return "ad_click";
  }
  return "?";
}

inline bool parse_channel(std::string_view s, Channel& out) {
  if (s == "page") out = Channel::Page;
  else if (s == "query") out = Channel::Query;
  else if (s == "ad_click") out = Channel::AdClick;
  else return false;
  return true;
}

struct Event {
  std::string user_id;
  int64_t ts = 0;
  Channel channel = Channel::Page;
  std::string text;
};

inline int64_t day_of(int64_t ts) {
  // floor division; UTC days, half-open [day, day+1)
  int64_t d = ts / kSecondsPerDay;
  if (ts < 0 && ts % kSecondsPerDay != 0) --d;
  return d;
}

// Lowercase ASCII, split on non-alphanumeric codepoints. Non-ASCII letters
// pass through unchanged; general punctuation (U+2000..206F), Latin-1
// punctuation/symbol blocks, and a few stray signs count as separators.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  };
  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    unsigned char b = static_cast<unsigned char>(text[i]);
    if (b < 0x80) {
      if ((b >= '0' && b <= '9') || (b >= 'a' && b <= 'z')) {
        cur.push_back(static_cast<char>(b));
      } else if (b >= 'A' && b <= 'Z') {
        cur.push_back(static_cast<char>(b - 'A' + 'a'));
      } else {
        flush();
      }
      ++i;
      continue;
    }
    // decode one UTF-8 sequence; malformed bytes act as separators
    uint32_t cp = 0;
    size_t len = 0;
    if ((b & 0xE0) == 0xC0) { cp = b & 0x1F; len = 2; }
    else if ((b & 0xF0) == 0xE0) { cp = b & 0x0F; len = 3; }
    else if ((b & 0xF8) == 0xF0) { cp = b & 0x07; len = 4; }
    if (len == 0 || i + len > n) {
      flush();
      ++i;
      continue;
    }
    bool ok = true;
    for (size_t k = 1; k < len; ++k) {
      unsigned char cb = static_cast<unsigned char>(text[i + k]);
      if ((cb & 0xC0) != 0x80) { ok = false; break; }
      cp = (cp << 6) | (cb & 0x3F);
    }
    if (!ok) {
      flush();
      ++i;
      continue;
    }
    bool sep = (cp >= 0xA0 && cp <= 0xBF) || cp == 0xD7 || cp == 0xF7 ||
               (cp >= 0x2000 && cp <= 0x206F) || (cp >= 0x2E00 && cp <= 0x2E7F) ||
               (cp >= 0x3000 && cp <= 0x303F);
    if (sep) flush();
    else cur.append(text.substr(i, len));
    i += len;
  }
  flush();
  return out;
}

inline constexpr const char* kUnkToken = "<UNK>";

// Token -> dense index map; index 0 is the unknown token.
class Vocab {
public:
  Vocab() { add(kUnkToken); }

  static Vocab from_tokens(const std::vector<std::string>& tokens) {
    Vocab v;
    for (size_t i = 0; i < tokens.size(); ++i) {
      if (i == 0) {
        if (tokens[0] != kUnkToken)
          throw std::runtime_error("vocab file must start with " + std::string(kUnkToken));
        continue;
      }
      v.add(tokens[i]);
    }
    return v;
  }

  uint32_t add(const std::string& tok) {
    auto [it, inserted] = index_.try_emplace(tok, static_cast<uint32_t>(tokens_.size()));
    if (inserted) tokens_.push_back(tok);
    return it->second;
  }

  uint32_t lookup(const std::string& tok) const {
    auto it = index_.find(tok);
    return it == index_.end() ? 0u : it->second;
  }

  const std::string& token(uint32_t i) const { return tokens_.at(i); }
  size_t size() const { return tokens_.size(); }

  // one token per line, line number == index
  std::string serialize() const {
    std::string out;
    for (const auto& t : tokens_) {
      out += t;
      out += '\n';
    }
    return out;
  }
  static Vocab load(const std::string& path) {
    std::vector<std::string> toks;
    for_each_line(path, [&](const std::string& line, size_t) { toks.push_back(line); });
    if (toks.empty()) throw std::runtime_error("empty vocab file " + path);
    return from_tokens(toks);
  }

  uint64_t hash() const { return fnv1a64(serialize()); }

private:
  std::unordered_map<std::string, uint32_t> index_;
  std::vector<std::string> tokens_;
};

// Streaming frequency counter for vocabulary builds. Tokens with total
// corpus frequency below min_frequency map to the unknown token. Index order
// follows first appearance, so builds are deterministic for a fixed corpus
// order. One vocabulary is shared by all channels and the ad text.
class VocabBuilder {
public:
  void add_text(std::string_view text) {
    for (auto& tok : tokenize(text)) {
      auto [it, inserted] = freq_.try_emplace(tok, 0u);
      if (inserted) order_.push_back(tok);
      ++it->second;
    }
  }

  Vocab build(uint32_t min_frequency) const {
    if (min_frequency < 1) throw std::invalid_argument("min_frequency must be >= 1");
    Vocab v;
    for (const auto& tok : order_)
      if (freq_.at(tok) >= min_frequency) v.add(tok);
    return v;
  }

private:
  std::unordered_map<std::string, uint32_t> freq_;
  std::vector<std::string> order_;
};

template <typename EventRange>
Vocab build_vocab(const EventRange& events, uint32_t min_frequency) {
  VocabBuilder b;
  for (const Event& e : events) b.add_text(e.text);
  return b.build(min_frequency);
}

struct Session {
  int64_t day = 0;
  std::vector<uint32_t> indices; // sorted, unique
};

struct ChannelSequence {
  Channel channel = Channel::Page;
  std::vector<Session> sessions; // day strictly increasing
};

// Daily sessions over [t_start, t_end): one multi-hot Session per calendar
// day that has events, holding the union of that day's token indices.
// Presence only; duplicates collapse. Keeps at most the last `max_sessions`.
inline ChannelSequence segment_sessions(std::span<const Event> events, Channel channel,
                                        const Vocab& vocab, int64_t t_start, int64_t t_end,
                                        uint32_t max_sessions = kDefaultSessionWindow) {
  std::map<int64_t, std::set<uint32_t>> by_day;
  for (const Event& e : events) {
    if (e.channel != channel || e.ts < t_start || e.ts >= t_end) continue;
    auto& day = by_day[day_of(e.ts)];
    for (auto& tok : tokenize(e.text)) day.insert(vocab.lookup(tok));
  }
  ChannelSequence seq{channel, {}};
  for (auto& [day, idx] : by_day) {
    if (idx.empty()) continue;
    seq.sessions.push_back({day, std::vector<uint32_t>(idx.begin(), idx.end())});
  }
  if (seq.sessions.size() > max_sessions)
    seq.sessions.erase(seq.sessions.begin(),
                       seq.sessions.end() - static_cast<ptrdiff_t>(max_sessions));
  return seq;
}

// Keep events with ts in [anchor - lookback_days*86400, anchor - delta).
inline std::vector<Event> clip_history(std::span<const Event> events, int64_t anchor_ts,
                                       int64_t delta_seconds, int64_t lookback_days) {
  if (delta_seconds < 0) throw std::invalid_argument("clip_history: delta must be >= 0");
  int64_t lo = INT64_MIN;
  if (lookback_days <= INT64_MAX / kSecondsPerDay) {
    int64_t span = lookback_days * kSecondsPerDay;
    if (anchor_ts >= INT64_MIN + span) lo = anchor_ts - span;
  }
  int64_t hi = anchor_ts - delta_seconds;
  std::vector<Event> out;
  for (const Event& e : events)
    if (e.ts >= lo && e.ts < hi) out.push_back(e);
  return out;
}

} // namespace mcsbn
