#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcsbn/logs.hpp"
#include "mcsbn/rng.hpp"

namespace mcsbn {

// Topic-model substitute for production logs. Each topic owns disjoint word
// sets per channel and for ad text; users draw 1-3 topics that are active in
// contiguous day blocks; events carry a topic word with probability equal to
// the channel fidelity, otherwise a channel noise word; positives are ads of
// the topic that is active near the interaction time.
struct SyntheticConfig {
  uint32_t num_users = 10000;
  uint32_t num_ads = 2000;
  uint32_t num_topics = 20;
  uint32_t days = 14;
  std::array<double, kNumChannels> event_rate{5.0, 3.0, 1.5}; // events/user/day
  std::array<double, kNumChannels> channel_fidelity{0.9, 0.5, 0.2};
  // permute the fidelity vector per user, so the informative channel varies
  // across users; turn off to pin fidelity to channel index
  bool per_user_channel_profile = true;
  uint32_t words_per_topic = 12; // per channel
  uint32_t ad_words_per_topic = 15;
  uint32_t noise_words_per_channel = 80;
  uint32_t positives_per_user = 3;
  double recency_mix = 0.8; // probability the positive follows the active topic
  uint32_t ad_text_min = 4, ad_text_max = 7;
  uint32_t vocab_budget = 50000;
  uint64_t seed = 1;

  void validate() const {
    if (num_users == 0 || num_ads == 0 || num_topics == 0 || days == 0 ||
        positives_per_user == 0 || words_per_topic == 0 || ad_words_per_topic == 0)
      throw std::invalid_argument("synthetic config: all counts must be positive");
    for (double f : channel_fidelity)
      if (!(f >= 0.0 && f <= 1.0))
        throw std::invalid_argument("synthetic config: fidelity must be in [0,1]");
    if (!(recency_mix >= 0.0 && recency_mix <= 1.0))
      throw std::invalid_argument("synthetic config: recency_mix must be in [0,1]");
    if (ad_text_min < 1 || ad_text_max < ad_text_min)
      throw std::invalid_argument("synthetic config: bad ad text length range");
    uint64_t words = static_cast<uint64_t>(num_topics) *
                         (kNumChannels * words_per_topic + ad_words_per_topic) +
                     kNumChannels * noise_words_per_channel;
    if (words > vocab_budget)
      throw std::invalid_argument("synthetic config: topics x words exceed the vocab budget");
  }

  nlohmann::json to_json() const {
    return {{"num_users", num_users},
            {"num_ads", num_ads},
            {"num_topics", num_topics},
            {"days", days},
            {"event_rate", event_rate},
            {"channel_fidelity", channel_fidelity},
            {"per_user_channel_profile", per_user_channel_profile},
            {"words_per_topic", words_per_topic},
            {"ad_words_per_topic", ad_words_per_topic},
            {"noise_words_per_channel", noise_words_per_channel},
            {"positives_per_user", positives_per_user},
            {"recency_mix", recency_mix},
            {"seed", seed}};
  }
};

struct SyntheticStats {
  size_t events = 0;
  size_t interactions = 0;
  size_t ads = 0;
};

namespace detail {

inline std::string topic_word(uint32_t topic, size_t channel, uint32_t i) {
  return "t" + std::to_string(topic) + "c" + std::to_string(channel) + "w" + std::to_string(i);
}
inline std::string ad_word(uint32_t topic, uint32_t i) {
  return "t" + std::to_string(topic) + "aw" + std::to_string(i);
}
inline std::string noise_word(size_t channel, uint32_t i) {
  return "n" + std::to_string(channel) + "w" + std::to_string(i);
}

inline std::string zero_pad(uint64_t x, int width) {
  std::string s = std::to_string(x);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

} // namespace detail

inline SyntheticStats gen_synthetic(const SyntheticConfig& cfg, std::ostream& events_out,
                                    std::ostream& ads_out, std::ostream& interactions_out) {
  cfg.validate();
  Rng rng(cfg.seed);
  SyntheticStats stats;

  // ad catalog: round-robin topics, two advertisers per topic
  std::vector<uint32_t> ad_topic(cfg.num_ads);
  std::vector<std::vector<uint32_t>> ads_of_topic(cfg.num_topics);
  {
    std::string buf;
    for (uint32_t a = 0; a < cfg.num_ads; ++a) {
      uint32_t topic = a % cfg.num_topics;
      ad_topic[a] = topic;
      ads_of_topic[topic].push_back(a);
      AdDoc ad;
      ad.ad_id = "ad" + detail::zero_pad(a, 5);
      uint32_t len = cfg.ad_text_min + static_cast<uint32_t>(rng.uniform_int(
                                           cfg.ad_text_max - cfg.ad_text_min + 1));
      for (uint32_t w = 0; w < len; ++w) {
        if (w) ad.text += ' ';
        ad.text += detail::ad_word(topic, static_cast<uint32_t>(rng.uniform_int(cfg.ad_words_per_topic)));
      }
      ad.advertiser_id = "adv" + std::to_string(topic * 2 + a % 2);
      append_ad_line(buf, ad);
      ++stats.ads;
    }
    ads_out << buf;
  }

  // compact event tuples, sorted globally by time before writing
  struct Ev {
    int64_t ts;
    uint32_t user;
    uint8_t channel;
    uint32_t topic;  // active topic, or UINT32_MAX for noise
    uint32_t word;
  };
  std::vector<Ev> events;
  events.reserve(static_cast<size_t>(cfg.num_users) * cfg.days * 10);

  struct Pos {
    int64_t ts;
    uint32_t user;
    uint32_t ad;
  };
  std::vector<Pos> positives;
  positives.reserve(static_cast<size_t>(cfg.num_users) * cfg.positives_per_user);

  for (uint32_t u = 0; u < cfg.num_users; ++u) {
    // 1-3 distinct topics, active in contiguous day blocks
    uint32_t n_topics = 1 + static_cast<uint32_t>(rng.uniform_int(3));
    std::vector<uint32_t> topics;
    while (topics.size() < n_topics) {
      uint32_t t = static_cast<uint32_t>(rng.uniform_int(cfg.num_topics));
      if (std::find(topics.begin(), topics.end(), t) == topics.end()) topics.push_back(t);
    }
    auto active_topic = [&](int64_t day) {
      if (day < 0) day = 0;
      if (day >= cfg.days) day = cfg.days - 1;
      size_t block = static_cast<size_t>(day) * topics.size() / cfg.days;
      return topics[std::min(block, topics.size() - 1)];
    };

    std::array<double, kNumChannels> fidelity = cfg.channel_fidelity;
    if (cfg.per_user_channel_profile) {
      for (size_t i = kNumChannels; i > 1; --i)
        std::swap(fidelity[i - 1], fidelity[rng.uniform_int(i)]);
    }

    for (uint32_t d = 0; d < cfg.days; ++d) {
      uint32_t topic = active_topic(d);
      for (size_t k = 0; k < kNumChannels; ++k) {
        int n = rng.poisson(cfg.event_rate[k]);
        for (int e = 0; e < n; ++e) {
          Ev ev;
          ev.ts = static_cast<int64_t>(d) * kSecondsPerDay + 1 +
                  static_cast<int64_t>(rng.uniform_int(kSecondsPerDay - 1));
          ev.user = u;
          ev.channel = static_cast<uint8_t>(k);
          if (rng.bernoulli(fidelity[k])) {
            ev.topic = topic;
            ev.word = static_cast<uint32_t>(rng.uniform_int(cfg.words_per_topic));
          } else {
            ev.topic = UINT32_MAX;
            ev.word = static_cast<uint32_t>(rng.uniform_int(cfg.noise_words_per_channel));
          }
          events.push_back(ev);
        }
      }
    }

    for (uint32_t i = 0; i < cfg.positives_per_user; ++i) {
      Pos p;
      int64_t lo = static_cast<int64_t>(cfg.days) * kSecondsPerDay / 4;
      int64_t hi = static_cast<int64_t>(cfg.days) * kSecondsPerDay;
      p.ts = lo + static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(hi - lo)));
      p.user = u;
      uint32_t topic = rng.bernoulli(cfg.recency_mix)
                           ? active_topic(day_of(p.ts))
                           : topics[rng.uniform_int(topics.size())];
      const auto& pool = ads_of_topic[topic];
      p.ad = pool[rng.uniform_int(pool.size())];
      positives.push_back(p);
    }
  }

  std::sort(events.begin(), events.end(), [](const Ev& a, const Ev& b) {
    if (a.ts != b.ts) return a.ts < b.ts;
    if (a.user != b.user) return a.user < b.user;
    if (a.channel != b.channel) return a.channel < b.channel;
    return a.word < b.word;
  });
  {
    std::string buf;
    buf.reserve(1 << 20);
    for (const Ev& ev : events) {
      Event e;
      e.user_id = "u" + detail::zero_pad(ev.user, 6);
      e.ts = ev.ts;
      e.channel = static_cast<Channel>(ev.channel);
      e.text = ev.topic == UINT32_MAX ? detail::noise_word(ev.channel, ev.word)
                                      : detail::topic_word(ev.topic, ev.channel, ev.word);
      append_event_line(buf, e);
      if (buf.size() > (1 << 20)) {
        events_out << buf;
        buf.clear();
      }
    }
    events_out << buf;
    stats.events = events.size();
  }

  std::sort(positives.begin(), positives.end(), [](const Pos& a, const Pos& b) {
    if (a.ts != b.ts) return a.ts < b.ts;
    if (a.user != b.user) return a.user < b.user;
    return a.ad < b.ad;
  });
  {
    std::string buf;
    for (const Pos& p : positives) {
      Interaction it;
      it.user_id = "u" + detail::zero_pad(p.user, 6);
      it.ad_id = "ad" + detail::zero_pad(p.ad, 5);
      it.ts = p.ts;
      it.label = 1;
      it.advertiser_id = "adv" + std::to_string(ad_topic[p.ad] * 2 + p.ad % 2);
      append_interaction_line(buf, it);
    }
    interactions_out << buf;
    stats.interactions = positives.size();
  }
  return stats;
}

} // namespace mcsbn
