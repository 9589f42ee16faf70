#pragma once

// Pipeline configuration: JSON file with strict unknown-key rejection,
// environment overrides under the RAGTAG_ prefix, and the derived
// work-directory layout shared by every stage.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragtag/model.hpp"
#include "ragtag/train.hpp"

namespace ragtag::config {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr int kConfigVersion = 1;

struct KbFileRef {
  std::string path;
  std::string language = "en";
};

struct CorpusRef {
  std::string path;
  std::size_t upsample = 1;
};

struct PathsSection {
  std::vector<KbFileRef> kb_docs;
  std::vector<KbFileRef> kb_entities;
  std::vector<CorpusRef> train;
  std::string eval;
  std::string work_dir = "work";
};

struct RetrievalSection {
  bool text2text = true;
  std::string text2ent = "sparse";  // sparse | dense | off
  bool ent2ent = true;
  std::size_t text2text_k = 16;
  std::size_t text2ent_k = 16;
  std::size_t max_iters = 3;
  std::size_t slice_limit = 384;
  bool entity_first = false;
  double bm25_k1 = 1.2;
  double bm25_b = 0.75;
  std::size_t dense_dim = 256;
};

struct ModelSection {
  std::string mode = "post";
  int d = 64;
  int layers = 2;
  int heads = 2;
  int max_positions = 512;
  std::uint64_t seed = 1;
  int epochs = 10;
  double lr = 2e-3;
  std::vector<train::BatchPhase> batch_schedule{{0, 8}};
  double dropout = 0.0;
  double weight_decay = 0.01;
  double warmup_frac = 0.1;
  std::size_t vocab_cap = 8192;
  std::string msf_init;  // checkpoint path for multi-stage fine-tuning
};

struct EnsembleSection {
  std::vector<std::uint64_t> seeds{1, 2, 3};
};

struct AnalyzeSection {
  std::vector<std::size_t> lengths{0, 16, 64, 128};
  std::size_t iou_bins = 20;
  bool iou_strip_whitespace = false;
};

struct Config {
  std::string language = "en";
  PathsSection paths;
  RetrievalSection retrieval;
  ModelSection model;
  EnsembleSection ensemble;
  AnalyzeSection analyze;
  int jobs = 1;

  // derived artifact locations
  fs::path work() const { return fs::path(paths.work_dir); }
  std::string store_dir() const { return (work() / "store").string(); }
  std::string doc_index_path(const std::string& lang) const {
    return (work() / "index" / ("docs." + lang + ".idx")).string();
  }
  std::string entity_index_path(const std::string& lang) const {
    return (work() / "index" / ("entities." + lang + ".idx")).string();
  }
  std::string dense_index_path(const std::string& lang) const {
    return (work() / "index" / ("entities." + lang + ".dense")).string();
  }
  std::string bundle_dir() const { return (work() / "bundles").string(); }
  std::string bundle_path(const std::string& corpus_path) const {
    return (fs::path(bundle_dir()) / (fs::path(corpus_path).stem().string() + ".bundles.jsonl"))
        .string();
  }
  std::string checkpoint_dir() const { return (work() / "ckpt").string(); }
  std::string checkpoint_path(std::uint64_t seed) const {
    return (fs::path(checkpoint_dir()) / ("model-seed" + std::to_string(seed) + ".bin")).string();
  }
  std::string metrics_path(std::uint64_t seed) const {
    return (fs::path(checkpoint_dir()) / ("metrics-seed" + std::to_string(seed) + ".csv")).string();
  }
  std::string pred_dir() const { return (work() / "pred").string(); }
  std::string pred_path(std::uint64_t seed) const {
    return (fs::path(pred_dir()) / ("eval-seed" + std::to_string(seed) + ".conll")).string();
  }
  std::string ensemble_pred_path() const {
    return (fs::path(pred_dir()) / "ensemble.conll").string();
  }
  std::string report_dir() const { return (work() / "reports").string(); }

  model::ModelConfig model_config() const {
    model::ModelConfig mc;
    mc.d = model.d;
    mc.layers = model.layers;
    mc.heads = model.heads;
    mc.max_positions = model.max_positions;
    return mc;
  }

  train::TrainConfig train_config() const {
    train::TrainConfig tc;
    tc.mode = model::mode_from_string(model.mode);
    tc.model = model_config();
    tc.epochs = model.epochs;
    tc.lr = model.lr;
    tc.seed = model.seed;
    tc.batch_schedule = model.batch_schedule;
    tc.dropout = model.dropout;
    tc.weight_decay = model.weight_decay;
    tc.warmup_frac = model.warmup_frac;
    tc.vocab_cap = model.vocab_cap;
    return tc;
  }

  json to_json() const;
};

namespace detail {

inline void check_keys(const json& j, const std::set<std::string>& allowed,
                       const std::string& where) {
  if (!j.is_object()) throw std::runtime_error("config: " + where + " must be an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key))
      throw std::runtime_error("config: unknown key \"" + key + "\" in " + where);
}

inline std::vector<KbFileRef> parse_kb_refs(const json& j, const std::string& where) {
  std::vector<KbFileRef> out;
  for (const auto& e : j) {
    check_keys(e, {"path", "language"}, where);
    KbFileRef ref;
    ref.path = e.at("path").get<std::string>();
    ref.language = e.value("language", "en");
    out.push_back(std::move(ref));
  }
  return out;
}

}  // namespace detail

inline Config parse_config(const json& j) {
  detail::check_keys(j, {"version", "language", "paths", "retrieval", "model", "ensemble",
                         "analyze", "jobs"},
                     "top level");
  if (j.contains("version") && j["version"].get<int>() != kConfigVersion)
    throw std::runtime_error("config: unsupported version");
  Config cfg;
  cfg.language = j.value("language", "en");
  cfg.jobs = j.value("jobs", 1);

  if (j.contains("paths")) {
    const json& p = j["paths"];
    detail::check_keys(p, {"kb_docs", "kb_entities", "train", "eval", "work_dir"}, "paths");
    if (p.contains("kb_docs")) cfg.paths.kb_docs = detail::parse_kb_refs(p["kb_docs"], "paths.kb_docs");
    if (p.contains("kb_entities"))
      cfg.paths.kb_entities = detail::parse_kb_refs(p["kb_entities"], "paths.kb_entities");
    if (p.contains("train")) {
      for (const auto& e : p["train"]) {
        detail::check_keys(e, {"path", "upsample"}, "paths.train");
        CorpusRef ref;
        ref.path = e.at("path").get<std::string>();
        ref.upsample = e.value("upsample", std::size_t{1});
        cfg.paths.train.push_back(std::move(ref));
      }
    }
    cfg.paths.eval = p.value("eval", "");
    cfg.paths.work_dir = p.value("work_dir", "work");
  }

  if (j.contains("retrieval")) {
    const json& r = j["retrieval"];
    detail::check_keys(r,
                       {"text2text", "text2ent", "ent2ent", "text2text_k", "text2ent_k",
                        "max_iters", "slice_limit", "entity_first", "bm25_k1", "bm25_b",
                        "dense_dim"},
                       "retrieval");
    auto& rc = cfg.retrieval;
    rc.text2text = r.value("text2text", rc.text2text);
    rc.text2ent = r.value("text2ent", rc.text2ent);
    rc.ent2ent = r.value("ent2ent", rc.ent2ent);
    rc.text2text_k = r.value("text2text_k", rc.text2text_k);
    rc.text2ent_k = r.value("text2ent_k", rc.text2ent_k);
    rc.max_iters = r.value("max_iters", rc.max_iters);
    rc.slice_limit = r.value("slice_limit", rc.slice_limit);
    rc.entity_first = r.value("entity_first", rc.entity_first);
    rc.bm25_k1 = r.value("bm25_k1", rc.bm25_k1);
    rc.bm25_b = r.value("bm25_b", rc.bm25_b);
    rc.dense_dim = r.value("dense_dim", rc.dense_dim);
    if (rc.text2ent != "sparse" && rc.text2ent != "dense" && rc.text2ent != "off")
      throw std::runtime_error("config: retrieval.text2ent must be sparse, dense or off");
  }

  if (j.contains("model")) {
    const json& m = j["model"];
    detail::check_keys(m,
                       {"mode", "d", "layers", "heads", "max_positions", "seed", "epochs", "lr",
                        "batch_schedule", "dropout", "weight_decay", "warmup_frac", "vocab_cap",
                        "msf_init"},
                       "model");
    auto& mc = cfg.model;
    mc.mode = m.value("mode", mc.mode);
    model::mode_from_string(mc.mode);  // validate
    mc.d = m.value("d", mc.d);
    mc.layers = m.value("layers", mc.layers);
    mc.heads = m.value("heads", mc.heads);
    mc.max_positions = m.value("max_positions", mc.max_positions);
    mc.seed = m.value("seed", mc.seed);
    mc.epochs = m.value("epochs", mc.epochs);
    mc.lr = m.value("lr", mc.lr);
    mc.dropout = m.value("dropout", mc.dropout);
    mc.weight_decay = m.value("weight_decay", mc.weight_decay);
    mc.warmup_frac = m.value("warmup_frac", mc.warmup_frac);
    mc.vocab_cap = m.value("vocab_cap", mc.vocab_cap);
    mc.msf_init = m.value("msf_init", mc.msf_init);
    if (m.contains("batch_schedule")) {
      mc.batch_schedule.clear();
      for (const auto& e : m["batch_schedule"]) {
        detail::check_keys(e, {"epoch", "size"}, "model.batch_schedule");
        mc.batch_schedule.push_back(
            train::BatchPhase{e.value("epoch", 0), e.at("size").get<int>()});
      }
      if (mc.batch_schedule.empty())
        throw std::runtime_error("config: batch_schedule must not be empty");
    }
  }

  if (j.contains("ensemble")) {
    detail::check_keys(j["ensemble"], {"seeds"}, "ensemble");
    if (j["ensemble"].contains("seeds"))
      cfg.ensemble.seeds = j["ensemble"]["seeds"].get<std::vector<std::uint64_t>>();
  }

  if (j.contains("analyze")) {
    const json& a = j["analyze"];
    detail::check_keys(a, {"lengths", "iou_bins", "iou_strip_whitespace"}, "analyze");
    if (a.contains("lengths")) cfg.analyze.lengths = a["lengths"].get<std::vector<std::size_t>>();
    cfg.analyze.iou_bins = a.value("iou_bins", cfg.analyze.iou_bins);
    cfg.analyze.iou_strip_whitespace =
        a.value("iou_strip_whitespace", cfg.analyze.iou_strip_whitespace);
  }
  return cfg;
}

/// Environment overrides: RAGTAG_<PATH> with underscores, e.g.
/// RAGTAG_MODEL_SEED=5, RAGTAG_RETRIEVAL_SLICE_LIMIT=64, RAGTAG_JOBS=2.
inline void apply_env_overrides(Config& cfg) {
  auto get = [](const char* name) -> const char* { return std::getenv(name); };
  if (const char* v = get("RAGTAG_JOBS")) cfg.jobs = std::stoi(v);
  if (const char* v = get("RAGTAG_LANGUAGE")) cfg.language = v;
  if (const char* v = get("RAGTAG_WORK_DIR")) cfg.paths.work_dir = v;
  if (const char* v = get("RAGTAG_MODEL_SEED")) cfg.model.seed = std::stoull(v);
  if (const char* v = get("RAGTAG_MODEL_MODE")) cfg.model.mode = v;
  if (const char* v = get("RAGTAG_MODEL_EPOCHS")) cfg.model.epochs = std::stoi(v);
  if (const char* v = get("RAGTAG_MODEL_LR")) cfg.model.lr = std::stod(v);
  if (const char* v = get("RAGTAG_RETRIEVAL_SLICE_LIMIT")) cfg.retrieval.slice_limit = std::stoull(v);
  if (const char* v = get("RAGTAG_RETRIEVAL_BM25_K1")) cfg.retrieval.bm25_k1 = std::stod(v);
  if (const char* v = get("RAGTAG_RETRIEVAL_BM25_B")) cfg.retrieval.bm25_b = std::stod(v);
  model::mode_from_string(cfg.model.mode);
}

inline Config load_config(const std::string& path, bool with_env = true) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  json j = json::parse(in);
  Config cfg = parse_config(j);
  if (with_env) apply_env_overrides(cfg);
  return cfg;
}

inline json Config::to_json() const {
  json j;
  j["version"] = kConfigVersion;
  j["language"] = language;
  j["jobs"] = jobs;
  json p;
  p["work_dir"] = paths.work_dir;
  p["eval"] = paths.eval;
  p["kb_docs"] = json::array();
  for (const auto& r : paths.kb_docs)
    p["kb_docs"].push_back(json{{"path", r.path}, {"language", r.language}});
  p["kb_entities"] = json::array();
  for (const auto& r : paths.kb_entities)
    p["kb_entities"].push_back(json{{"path", r.path}, {"language", r.language}});
  p["train"] = json::array();
  for (const auto& r : paths.train)
    p["train"].push_back(json{{"path", r.path}, {"upsample", r.upsample}});
  j["paths"] = p;
  j["retrieval"] = json{{"text2text", retrieval.text2text},
                        {"text2ent", retrieval.text2ent},
                        {"ent2ent", retrieval.ent2ent},
                        {"text2text_k", retrieval.text2text_k},
                        {"text2ent_k", retrieval.text2ent_k},
                        {"max_iters", retrieval.max_iters},
                        {"slice_limit", retrieval.slice_limit},
                        {"entity_first", retrieval.entity_first},
                        {"bm25_k1", retrieval.bm25_k1},
                        {"bm25_b", retrieval.bm25_b},
                        {"dense_dim", retrieval.dense_dim}};
  json bs = json::array();
  for (const auto& b : model.batch_schedule)
    bs.push_back(json{{"epoch", b.from_epoch}, {"size", b.size}});
  j["model"] = json{{"mode", model.mode},
                    {"d", model.d},
                    {"layers", model.layers},
                    {"heads", model.heads},
                    {"max_positions", model.max_positions},
                    {"seed", model.seed},
                    {"epochs", model.epochs},
                    {"lr", model.lr},
                    {"batch_schedule", bs},
                    {"dropout", model.dropout},
                    {"weight_decay", model.weight_decay},
                    {"warmup_frac", model.warmup_frac},
                    {"vocab_cap", model.vocab_cap},
                    {"msf_init", model.msf_init}};
  j["ensemble"] = json{{"seeds", ensemble.seeds}};
  j["analyze"] = json{{"lengths", analyze.lengths},
                      {"iou_bins", analyze.iou_bins},
                      {"iou_strip_whitespace", analyze.iou_strip_whitespace}};
  return j;
}

}  // namespace ragtag::config
