// mcsbn: multi-channel sequential user/ad embedding pipelines.
// One subcommand per pipeline stage; exit 0 on success, 1 on data/model
// errors, 2 on usage errors.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>

#include <CLI11.hpp>

#include "mcsbn/bow.hpp"
#include "mcsbn/evalrank.hpp"
#include "mcsbn/serving.hpp"
#include "mcsbn/synthetic.hpp"
#include "mcsbn/training.hpp"

using namespace mcsbn;
namespace fs = std::filesystem;

namespace {

Vocab load_vocab_checked(const std::string& path, const ModelParams<float>* model = nullptr) {
  Vocab vocab = Vocab::load(path);
  if (model && model->vocab_hash != 0 && model->vocab_hash != vocab.hash())
    throw std::runtime_error("vocab file " + path + " does not match the checkpoint (hash mismatch)");
  if (model && model->vocab_size() != 0 && vocab.size() != model->vocab_size())
    throw std::runtime_error("vocab size mismatch: checkpoint expects " +
                             std::to_string(model->vocab_size()));
  return vocab;
}

Variant parse_variant_or_throw(const std::string& name) {
  Variant v;
  if (!parse_variant(name, v)) throw std::runtime_error("unknown variant: " + name);
  return v;
}

UserRole parse_role(const std::string& name) {
  if (name == "train") return UserRole::Train;
  if (name == "val") return UserRole::Val;
  if (name == "eval") return UserRole::Eval;
  throw std::runtime_error("unknown role: " + name);
}

void append_csv_row(const std::string& path, const MetricsReport& report) {
  bool fresh = !fs::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot open " + path);
  if (fresh) out << MetricsReport::csv_header() << "\n";
  out << report.csv_row() << "\n";
}

int cmd_gen_synthetic(const SyntheticConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream events(out_dir + "/events.jsonl", std::ios::binary);
  std::ofstream ads(out_dir + "/ads.jsonl", std::ios::binary);
  std::ofstream inter(out_dir + "/interactions.jsonl", std::ios::binary);
  if (!events || !ads || !inter) throw std::runtime_error("cannot write into " + out_dir);
  auto stats = gen_synthetic(cfg, events, ads, inter);
  nlohmann::json echo = cfg.to_json();
  echo["events"] = stats.events;
  echo["interactions"] = stats.interactions;
  echo["ads"] = stats.ads;
  write_file_atomic(out_dir + "/synthetic_config.json", echo.dump(2) + "\n");
  std::cout << echo.dump() << "\n";
  return 0;
}

int cmd_build_vocab(const std::string& events_path, const std::string& ads_path,
                    uint32_t min_freq, const std::string& out) {
  VocabBuilder builder;
  size_t bad = 0;
  for_each_line(events_path, [&](const std::string& line, size_t) {
    if (auto e = parse_event_line(line)) builder.add_text(e->text);
    else ++bad;
  });
  if (!ads_path.empty()) {
    auto catalog = load_ad_catalog(ads_path, &bad);
    for (auto& ad : catalog.ads) builder.add_text(ad.text);
  }
  Vocab vocab = builder.build(min_freq);
  write_file_atomic(out, vocab.serialize());
  nlohmann::json j{{"tokens", vocab.size()},
                   {"min_frequency", min_freq},
                   {"vocab_hash", vocab.hash()},
                   {"malformed_rows", bad}};
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_build_dataset(const std::string& events_path, const std::string& inter_path,
                      const std::string& vocab_path, const TrainConfig& cfg,
                      const std::string& out) {
  Vocab vocab = Vocab::load(vocab_path);
  size_t bad_events = 0, bad_inter = 0;
  auto events = load_events(events_path, &bad_events);
  auto interactions = load_interactions(inter_path, &bad_inter);
  BuildExamplesStats stats;
  auto examples = build_examples(interactions, events, vocab, cfg, &stats);
  nlohmann::json echo = cfg.to_json();
  echo["source_events"] = events_path;
  echo["source_interactions"] = inter_path;
  write_file_atomic(out, serialize_dataset(examples, vocab.hash(), echo));
  nlohmann::json j{{"examples", stats.emitted},
                   {"positives", stats.positives},
                   {"skipped_negative_label", stats.skipped_negative_label},
                   {"malformed_events", bad_events},
                   {"malformed_interactions", bad_inter}};
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_train(const std::string& dataset_path, const std::string& ads_path,
              const std::string& vocab_path, const std::string& events_path,
              const std::string& variant_name_str, TrainConfig cfg, const std::string& out) {
  Variant variant = parse_variant_or_throw(variant_name_str);
  Vocab vocab = Vocab::load(vocab_path);
  auto catalog = load_ad_catalog(ads_path);
  catalog.attach_vocab(vocab);

  if (variant == Variant::Bow) {
    // the word-level baseline has no parameters; its "checkpoint" carries
    // the idf table built from the training-role corpus
    if (events_path.empty())
      throw std::runtime_error("train --variant bow needs --events for the idf corpus");
    std::vector<std::string> docs;
    size_t bad = 0;
    for_each_line(events_path, [&](const std::string& line, size_t) {
      auto e = parse_event_line(line);
      if (!e) {
        ++bad;
        return;
      }
      if (user_role(e->user_id, cfg.seed, cfg.validation_fraction, cfg.eval_fraction) ==
          UserRole::Train)
        docs.push_back(e->text);
    });
    for (auto& ad : catalog.ads) docs.push_back(ad.text);
    IdfTable idf = IdfTable::build(docs);
    ModelParams<float> model(Variant::Bow, vocab.size(), 1, cfg.seed);
    model.vocab_hash = vocab.hash();
    model.config_echo = cfg.to_json();
    nlohmann::json idf_json;
    for (auto& [tok, v] : idf.idf) idf_json[tok] = v;
    model.config_echo["idf"] = std::move(idf_json);
    model.config_echo["idf_n_docs"] = idf.n_docs;
    save_checkpoint(model, out);
    nlohmann::json j{{"variant", "bow"}, {"idf_tokens", idf.idf.size()}, {"docs", docs.size()}};
    std::cout << j.dump() << "\n";
    return 0;
  }

  if (dataset_path.empty()) throw std::runtime_error("train needs --dataset");
  Dataset ds = load_dataset(dataset_path);
  if (ds.vocab_hash != vocab.hash())
    throw std::runtime_error("dataset was featurized with a different vocab (hash mismatch)");

  TrainReport report;
  auto model = train<float>(ds.examples, catalog, vocab, variant, cfg, report);
  save_checkpoint(model, out);
  nlohmann::json j = report.to_json();
  j["variant"] = variant_name(variant);
  j["checkpoint"] = out;
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_update_vectors(const std::string& ckpt_path, const std::string& vocab_path,
                       const std::string& events_path, const std::string& store_path,
                       size_t batch_size, int64_t fail_after) {
  auto model = load_checkpoint<float>(ckpt_path);
  Vocab vocab = load_vocab_checked(vocab_path, &model);
  VectorStore store;
  store.open(store_path);
  if (fail_after >= 0) store.test_fail_after_records(fail_after);

  UpdateReport total;
  size_t malformed = 0;
  std::vector<Event> batch;
  batch.reserve(batch_size);
  auto t0 = std::chrono::steady_clock::now();
  auto flush = [&] {
    if (batch.empty()) return;
    auto rep = apply_event_batch(store, model, vocab, batch);
    total.events_applied += rep.events_applied;
    total.users_touched += rep.users_touched;
    total.sessions_committed += rep.sessions_committed;
    total.late_events += rep.late_events;
    batch.clear();
  };
  for_each_line(events_path, [&](const std::string& line, size_t) {
    if (auto e = parse_event_line(line)) {
      batch.push_back(std::move(*e));
      if (batch.size() >= batch_size) flush();
    } else {
      ++malformed;
    }
  });
  flush();
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  nlohmann::json j = total.to_json();
  j["malformed_rows"] = malformed;
  j["store_users"] = store.count();
  j["elapsed_seconds"] = secs;
  j["events_per_second"] = secs > 0 ? (total.events_applied + total.late_events) / secs : 0.0;
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_score(const std::string& ckpt_path, const std::string& vocab_path,
              const std::string& store_path, const std::string& user_id,
              const std::string& candidates_path, size_t top_k, unsigned threads) {
  auto model = load_checkpoint<float>(ckpt_path);
  Vocab vocab = load_vocab_checked(vocab_path, &model);
  VectorStore store;
  store.open(store_path);
  auto candidates = load_ad_catalog(candidates_path);
  candidates.attach_vocab(vocab);
  auto user = get_user_vector(store, model, user_id);
  AdCache cache(8192, model.model_version());
  ScoreDiagnostics diag;
  auto ranked = score_candidates(std::span<const float>(user.h), candidates.ads, cache, model.ad,
                                 top_k, &diag, threads);
  std::cout << "rank,ad_id,score\n";
  for (const auto& c : ranked)
    std::cout << c.rank << ',' << c.ad_id << ',' << format_g9(c.score) << "\n";
  if (diag.invalid_candidates > 0)
    std::cerr << "skipped " << diag.invalid_candidates << " invalid candidates\n";
  return 0;
}

int cmd_export_features(const std::string& ckpt_path, const std::string& vocab_path,
                        const std::string& store_path, const std::string& pairs_path,
                        const std::string& ads_path, const std::string& out_path) {
  auto model = load_checkpoint<float>(ckpt_path);
  Vocab vocab = load_vocab_checked(vocab_path, &model);
  VectorStore store;
  store.open(store_path);
  auto catalog = load_ad_catalog(ads_path);
  catalog.attach_vocab(vocab);
  std::vector<std::pair<std::string, std::string>> pairs;
  size_t bad = 0;
  for_each_line(pairs_path, [&](const std::string& line, size_t) {
    try {
      auto j = nlohmann::json::parse(line);
      pairs.emplace_back(j.at("user_id").get<std::string>(), j.at("ad_id").get<std::string>());
    } catch (const nlohmann::json::exception&) {
      ++bad;
    }
  });
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  auto stats = export_features(store, model, catalog, pairs, out);
  nlohmann::json j{{"rows", stats.rows},
                   {"missing_ads", stats.missing_ads},
                   {"malformed_pairs", bad},
                   {"columns", 2 * model.dim() + 1}};
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& vocab_path,
             const std::string& events_path, const std::string& inter_path,
             const std::string& ads_path, size_t m, uint64_t seed, const std::string& role_name,
             const std::string& csv_path, unsigned threads) {
  auto model = load_checkpoint<float>(ckpt_path);
  Vocab vocab = load_vocab_checked(vocab_path, &model);
  auto catalog = load_ad_catalog(ads_path);
  catalog.attach_vocab(vocab);
  auto events = load_events(events_path);
  auto interactions = load_interactions(inter_path);

  TrainConfig cfg = TrainConfig::from_json(model.config_echo);
  std::vector<Interaction> selected;
  if (role_name == "all") {
    selected = interactions;
  } else {
    UserRole want = parse_role(role_name);
    for (auto& it : interactions)
      if (user_role(it.user_id, cfg.seed, cfg.validation_fraction, cfg.eval_fraction) == want)
        selected.push_back(it);
  }
  if (selected.empty()) throw std::runtime_error("no interactions for role " + role_name);

  bool is_bow = model.variant() == Variant::Bow;
  BuildEvalStats stats;
  auto examples =
      build_eval_examples(selected, events, vocab, catalog, cfg, /*keep_texts=*/is_bow, &stats);
  if (examples.empty()) throw std::runtime_error("no evaluable examples");

  std::unique_ptr<RankScorer> scorer;
  if (is_bow) {
    IdfTable idf;
    idf.n_docs = model.config_echo.value("idf_n_docs", size_t{1});
    for (auto& [tok, v] : model.config_echo.at("idf").items()) idf.idf[tok] = v.get<double>();
    scorer = std::make_unique<BowScorer>(std::move(idf), catalog);
  } else {
    scorer = std::make_unique<ModelScorer>(model, catalog, threads);
  }
  auto report = evaluate_ranking(*scorer, examples, catalog, m, seed, threads);
  nlohmann::json j = report.to_json();
  j["variant"] = variant_name(model.variant());
  j["role"] = role_name;
  j["missing_ads"] = stats.missing_ads;
  std::cout << j.dump() << "\n";
  if (!csv_path.empty()) append_csv_row(csv_path, report);
  return 0;
}

int cmd_inspect(const std::string& path) {
  std::string head = read_file(path).substr(0, 8);
  if (head == kCheckpointMagic) {
    auto model = load_checkpoint<float>(path);
    std::cout << "checkpoint version " << kCheckpointVersion << "\n";
    std::cout << "variant: " << variant_name(model.variant()) << "\n";
    std::cout << "dim: " << model.dim() << "  vocab: " << model.vocab_size() << "\n";
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(model.vocab_hash));
    std::cout << "vocab_hash: " << hex << "\n";
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(model.model_version()));
    std::cout << "model_version: " << hex << "\n";
    auto echo = model.config_echo;
    echo.erase("idf"); // too large to print
    std::cout << "config: " << echo.dump() << "\n";
    std::cout << "tensors:\n";
    for (auto& [name, t] : model.tensors()) {
      std::cout << "  " << name << " (";
      for (size_t i = 0; i < t->shape.size(); ++i)
        std::cout << (i ? "x" : "") << t->shape[i];
      std::cout << ")\n";
    }
    return 0;
  }
  if (head == kStoreMagic) {
    VectorStore store;
    store.open(path);
    std::cout << "store version " << kStoreVersion << "\n";
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(store.model_version()));
    std::cout << "model_version: " << hex << "\n";
    std::cout << "users: " << store.count() << "\n";
    std::cout << "watermark_ts: " << store.watermark() << "\n";
    std::cout << "committed_bytes: " << store.committed_len() << "\n";
    size_t shown = 0;
    for (auto& [user, blob] : store.entries()) {
      if (shown++ >= 5) break;
      UserState s = UserState::deserialize(blob);
      std::cout << "  " << user << " dim=" << s.dim;
      for (size_t k = 0; k < kNumChannels; ++k) {
        std::cout << " " << channel_name(static_cast<Channel>(k)) << "(day=";
        if (s.ch[k].watermark_day == kNoDay) std::cout << "-";
        else std::cout << s.ch[k].watermark_day;
        std::cout << ",open=" << s.ch[k].open_session.size() << ")";
      }
      std::cout << "\n";
    }
    return 0;
  }
  if (head == kDatasetMagic) {
    Dataset ds = load_dataset(path);
    std::cout << "dataset version " << kDatasetVersion << "\n";
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(ds.vocab_hash));
    std::cout << "vocab_hash: " << hex << "\n";
    std::cout << "examples: " << ds.examples.size() << "\n";
    std::cout << "config: " << ds.config_echo.dump() << "\n";
    return 0;
  }
  throw std::runtime_error("unrecognized file magic in " + path);
}

void add_train_config_flags(CLI::App* cmd, TrainConfig& cfg) {
  cmd->add_option("--dim", cfg.dim, "embedding dimension");
  cmd->add_option("--batch", cfg.batch, "mini-batch size");
  cmd->add_option("--steps", cfg.max_steps, "maximum mini-batch updates");
  cmd->add_option("--negatives", cfg.negatives, "negatives per example");
  cmd->add_option("--lr", cfg.lr, "Adam learning rate");
  cmd->add_option("--embed-dim", cfg.embed_dim, "ad word-embedding width");
  cmd->add_option("--patience", cfg.patience, "early-stop patience (evaluations)");
  cmd->add_option("--eval-every", cfg.eval_every, "steps between validation evaluations");
  cmd->add_option("--val-fraction", cfg.validation_fraction, "validation user fraction");
  cmd->add_option("--eval-fraction", cfg.eval_fraction, "held-out evaluation user fraction");
  cmd->add_option("--threads", cfg.threads, "worker threads");
  cmd->add_option("--seed", cfg.seed, "rng seed");
  cmd->add_flag("--uniform-negatives", cfg.uniform_negatives,
                "sample negatives uniformly instead of by ad frequency");
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-channel sequential user/ad embeddings"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from a TOML-style file; flags win");
  std::function<int()> action;

  // gen-synthetic
  {
    auto* cmd = app.add_subcommand("gen-synthetic", "generate a synthetic log corpus");
    auto cfg = std::make_shared<SyntheticConfig>();
    auto out = std::make_shared<std::string>();
    cmd->add_option("--out", *out, "output directory")->required();
    cmd->add_option("--seed", cfg->seed, "rng seed");
    cmd->add_option("--users", cfg->num_users, "number of users");
    cmd->add_option("--ads", cfg->num_ads, "number of ads");
    cmd->add_option("--topics", cfg->num_topics, "number of topics");
    cmd->add_option("--days", cfg->days, "days of history");
    cmd->add_option("--event-rates", cfg->event_rate, "events/user/day per channel (3 values)");
    cmd->add_option("--fidelities", cfg->channel_fidelity, "topic fidelity per channel (3 values)");
    cmd->add_flag("!--no-user-profile", cfg->per_user_channel_profile,
                  "pin fidelities to channel index instead of permuting per user");
    cmd->add_option("--positives-per-user", cfg->positives_per_user, "positives per user");
    cmd->add_option("--recency-mix", cfg->recency_mix,
                    "probability a positive follows the active topic");
    cmd->callback([cfg, out, &action] { action = [=] { return cmd_gen_synthetic(*cfg, *out); }; });
  }

  // build-vocab
  {
    auto* cmd = app.add_subcommand("build-vocab", "build the shared vocabulary");
    auto events = std::make_shared<std::string>();
    auto ads = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto minf = std::make_shared<uint32_t>(3);
    cmd->add_option("--events", *events, "event log (jsonl)")->required();
    cmd->add_option("--ads", *ads, "ad catalog (jsonl); included in the corpus");
    cmd->add_option("--min-frequency", *minf, "minimum token frequency");
    cmd->add_option("--out", *out, "vocab file")->required();
    cmd->callback([=, &action] {
      action = [=] { return cmd_build_vocab(*events, *ads, *minf, *out); };
    });
  }

  // build-dataset
  {
    auto* cmd = app.add_subcommand("build-dataset", "featurize training examples");
    auto events = std::make_shared<std::string>();
    auto inter = std::make_shared<std::string>();
    auto vocab = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto cfg = std::make_shared<TrainConfig>();
    cmd->add_option("--events", *events, "event log (jsonl)")->required();
    cmd->add_option("--interactions", *inter, "interaction log (jsonl)")->required();
    cmd->add_option("--vocab", *vocab, "vocab file")->required();
    cmd->add_option("--delta", cfg->delta_seconds, "withholding window before the anchor (s)");
    cmd->add_option("--lookback", cfg->lookback_days, "history lookback (days)");
    cmd->add_option("--out", *out, "dataset file")->required();
    cmd->callback([=, &action] {
      action = [=] { return cmd_build_dataset(*events, *inter, *vocab, *cfg, *out); };
    });
  }

  // train
  {
    auto* cmd = app.add_subcommand("train", "train a model variant");
    auto dataset = std::make_shared<std::string>();
    auto ads = std::make_shared<std::string>();
    auto vocab = std::make_shared<std::string>();
    auto events = std::make_shared<std::string>();
    auto variant = std::make_shared<std::string>("mcsbn");
    auto out = std::make_shared<std::string>();
    auto cfg = std::make_shared<TrainConfig>();
    cmd->add_option("--dataset", *dataset, "dataset file from build-dataset");
    cmd->add_option("--ads", *ads, "ad catalog (jsonl)")->required();
    cmd->add_option("--vocab", *vocab, "vocab file")->required();
    cmd->add_option("--events", *events, "event log (bow idf corpus only)");
    cmd->add_option("--variant", *variant,
                    "mcsbn|pool-last|pool-max|seq-max|seq-avg|seq-hid|bow");
    cmd->add_option("--out", *out, "checkpoint file")->required();
    add_train_config_flags(cmd, *cfg);
    cmd->callback([=, &action] {
      action = [=] { return cmd_train(*dataset, *ads, *vocab, *events, *variant, *cfg, *out); };
    });
  }

  // update-vectors
  {
    auto* cmd = app.add_subcommand("update-vectors", "apply an event stream to the store");
    auto ckpt = std::make_shared<std::string>();
    auto vocab = std::make_shared<std::string>();
    auto events = std::make_shared<std::string>();
    auto store = std::make_shared<std::string>();
    auto batch = std::make_shared<size_t>(50000);
    auto fail_after = std::make_shared<int64_t>(-1);
    cmd->add_option("--checkpoint", *ckpt, "model checkpoint")->required();
    cmd->add_option("--vocab", *vocab, "vocab file")->required();
    cmd->add_option("--events", *events, "event log (jsonl)")->required();
    cmd->add_option("--store", *store, "vector store file")->required();
    cmd->add_option("--batch-size", *batch, "events per commit batch");
    cmd->add_option("--fail-after-records", *fail_after, "fault injection: die mid-batch")
        ->group(""); // hidden
    cmd->callback([=, &action] {
      action = [=] {
        return cmd_update_vectors(*ckpt, *vocab, *events, *store, *batch, *fail_after);
      };
    });
  }

  // score
  {
    auto* cmd = app.add_subcommand("score", "rank candidate ads for a user");
    auto ckpt = std::make_shared<std::string>();
    auto vocab = std::make_shared<std::string>();
    auto store = std::make_shared<std::string>();
    auto user = std::make_shared<std::string>();
    auto cands = std::make_shared<std::string>();
    auto topk = std::make_shared<size_t>(10);
    auto threads = std::make_shared<unsigned>(default_threads());
    cmd->add_option("--checkpoint", *ckpt, "model checkpoint")->required();
    cmd->add_option("--vocab", *vocab, "vocab file")->required();
    cmd->add_option("--store", *store, "vector store file")->required();
    cmd->add_option("--user", *user, "user id")->required();
    cmd->add_option("--candidates", *cands, "candidate ads (jsonl)")->required();
    cmd->add_option("--top-k", *topk, "results to return");
    cmd->add_option("--threads", *threads, "encoder threads");
    cmd->callback([=, &action] {
      action = [=] { return cmd_score(*ckpt, *vocab, *store, *user, *cands, *topk, *threads); };
    });
  }

  // export-features
  {
    auto* cmd = app.add_subcommand("export-features", "emit (h_u, h_a, S) rows as CSV");
    auto ckpt = std::make_shared<std::string>();
    auto vocab = std::make_shared<std::string>();
    auto store = std::make_shared<std::string>();
    auto pairs = std::make_shared<std::string>();
    auto ads = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    cmd->add_option("--checkpoint", *ckpt, "model checkpoint")->required();
    cmd->add_option("--vocab", *vocab, "vocab file")->required();
    cmd->add_option("--store", *store, "vector store file")->required();
    cmd->add_option("--pairs", *pairs, "jsonl rows with user_id and ad_id")->required();
    cmd->add_option("--ads", *ads, "ad catalog (jsonl)")->required();
    cmd->add_option("--out", *out, "output csv")->required();
    cmd->callback([=, &action] {
      action = [=] { return cmd_export_features(*ckpt, *vocab, *store, *pairs, *ads, *out); };
    });
  }

  // eval
  {
    auto* cmd = app.add_subcommand("eval", "candidate-set ranking metrics");
    auto ckpt = std::make_shared<std::string>();
    auto vocab = std::make_shared<std::string>();
    auto events = std::make_shared<std::string>();
    auto inter = std::make_shared<std::string>();
    auto ads = std::make_shared<std::string>();
    auto m = std::make_shared<size_t>(20);
    auto seed = std::make_shared<uint64_t>(1);
    auto role = std::make_shared<std::string>("eval");
    auto csv = std::make_shared<std::string>();
    auto threads = std::make_shared<unsigned>(default_threads());
    cmd->add_option("--checkpoint", *ckpt, "model checkpoint")->required();
    cmd->add_option("--vocab", *vocab, "vocab file")->required();
    cmd->add_option("--events", *events, "event log (jsonl)")->required();
    cmd->add_option("--interactions", *inter, "interaction log (jsonl)")->required();
    cmd->add_option("--ads", *ads, "ad catalog (jsonl)")->required();
    cmd->add_option("--m", *m, "sampled negatives per positive");
    cmd->add_option("--seed", *seed, "negative-sampling seed");
    cmd->add_option("--role", *role, "user role to evaluate: train|val|eval|all");
    cmd->add_option("--csv", *csv, "append a metric row to this csv");
    cmd->add_option("--threads", *threads, "scoring threads");
    cmd->callback([=, &action] {
      action = [=] {
        return cmd_eval(*ckpt, *vocab, *events, *inter, *ads, *m, *seed, *role, *csv, *threads);
      };
    });
  }

  // inspect
  {
    auto* cmd = app.add_subcommand("inspect", "summarize a checkpoint, store, or dataset");
    auto path = std::make_shared<std::string>();
    cmd->add_option("path", *path, "file to inspect")->required();
    cmd->callback([=, &action] { action = [=] { return cmd_inspect(*path); }; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    return action ? action() : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
