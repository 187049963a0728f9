#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcsbn/featurize.hpp"
#include "mcsbn/io.hpp"

namespace mcsbn {

// JSONL record types shared by the pipelines. Malformed rows are skipped and
// counted, never fatal.

struct Interaction {
  std::string user_id;
  std::string ad_id;
  int64_t ts = 0;
  int label = 0; // 1 = click followed by a conversion
  std::string advertiser_id;
};

struct AdDoc {
  std::string ad_id;
  std::string text;
  std::string advertiser_id;
  std::vector<uint32_t> tokens; // filled when a vocab is attached
};

struct AdCatalog {
  std::vector<AdDoc> ads;
  std::unordered_map<std::string, size_t> by_id;

  const AdDoc* find(const std::string& ad_id) const {
    auto it = by_id.find(ad_id);
    return it == by_id.end() ? nullptr : &ads[it->second];
  }
  size_t size() const { return ads.size(); }

  void attach_vocab(const Vocab& vocab) {
    for (auto& ad : ads) {
      ad.tokens.clear();
      for (auto& tok : tokenize(ad.text)) ad.tokens.push_back(vocab.lookup(tok));
    }
  }
};

inline std::optional<Event> parse_event_line(const std::string& line) {
  try {
    auto j = nlohmann::json::parse(line);
    Event e;
    e.user_id = j.at("user_id").get<std::string>();
    e.ts = j.at("ts").get<int64_t>();
    if (e.ts <= 0) return std::nullopt;
    if (!parse_channel(j.at("channel").get<std::string>(), e.channel)) return std::nullopt;
    e.text = j.at("text").get<std::string>();
    return e;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

inline std::vector<Event> load_events(const std::string& path, size_t* malformed = nullptr) {
  std::vector<Event> out;
  size_t bad = 0;
  for_each_line(path, [&](const std::string& line, size_t) {
    if (auto e = parse_event_line(line))
      out.push_back(std::move(*e));
    else
      ++bad;
  });
  if (malformed) *malformed = bad;
  return out;
}

inline std::optional<Interaction> parse_interaction_line(const std::string& line) {
  try {
    auto j = nlohmann::json::parse(line);
    Interaction it;
    it.user_id = j.at("user_id").get<std::string>();
    it.ad_id = j.at("ad_id").get<std::string>();
    it.ts = j.at("ts").get<int64_t>();
    it.label = j.at("label").get<int>();
    it.advertiser_id = j.value("advertiser_id", std::string{});
    if (it.ts <= 0 || (it.label != 0 && it.label != 1)) return std::nullopt;
    return it;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

inline std::vector<Interaction> load_interactions(const std::string& path,
                                                  size_t* malformed = nullptr) {
  std::vector<Interaction> out;
  size_t bad = 0;
  for_each_line(path, [&](const std::string& line, size_t) {
    if (auto it = parse_interaction_line(line))
      out.push_back(std::move(*it));
    else
      ++bad;
  });
  if (malformed) *malformed = bad;
  return out;
}

inline AdCatalog load_ad_catalog(const std::string& path, size_t* malformed = nullptr) {
  AdCatalog cat;
  size_t bad = 0;
  for_each_line(path, [&](const std::string& line, size_t) {
    try {
      auto j = nlohmann::json::parse(line);
      AdDoc ad;
      ad.ad_id = j.at("ad_id").get<std::string>();
      ad.text = j.at("text").get<std::string>();
      ad.advertiser_id = j.value("advertiser_id", std::string{});
      if (cat.by_id.count(ad.ad_id)) {
        ++bad;
        return;
      }
      cat.by_id[ad.ad_id] = cat.ads.size();
      cat.ads.push_back(std::move(ad));
    } catch (const nlohmann::json::exception&) {
      ++bad;
    }
  });
  if (malformed) *malformed = bad;
  return cat;
}

// minimal JSON string escaping for the writers below
inline void json_escape_into(std::string& out, std::string_view s) {
  out.push_back('"');
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out.push_back(c);
        }
    }
  }
  out.push_back('"');
}

inline void append_event_line(std::string& out, const Event& e) {
  out += "{\"user_id\":";
  json_escape_into(out, e.user_id);
  out += ",\"ts\":" + std::to_string(e.ts);
  out += ",\"channel\":\"";
  out += channel_name(e.channel);
  out += "\",\"text\":";
  json_escape_into(out, e.text);
  out += "}\n";
}

inline void append_interaction_line(std::string& out, const Interaction& it) {
  out += "{\"user_id\":";
  json_escape_into(out, it.user_id);
  out += ",\"ad_id\":";
  json_escape_into(out, it.ad_id);
  out += ",\"ts\":" + std::to_string(it.ts);
  out += ",\"label\":" + std::to_string(it.label);
  out += ",\"advertiser_id\":";
  json_escape_into(out, it.advertiser_id);
  out += "}\n";
}

inline void append_ad_line(std::string& out, const AdDoc& ad) {
  out += "{\"ad_id\":";
  json_escape_into(out, ad.ad_id);
  out += ",\"text\":";
  json_escape_into(out, ad.text);
  out += ",\"advertiser_id\":";
  json_escape_into(out, ad.advertiser_id);
  out += "}\n";
}

} // namespace mcsbn
