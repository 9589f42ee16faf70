#pragma once

// The eight batch stages behind the CLI. Every stage reads and writes only
// the documented artifacts under the work directory, dumps the effective
// config beside each artifact, and is deterministic for a fixed config
// (including the --jobs level).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ragtag/bm25.hpp"
#include "ragtag/config.hpp"
#include "ragtag/corpus.hpp"
#include "ragtag/embed.hpp"
#include "ragtag/ensemble.hpp"
#include "ragtag/eval.hpp"
#include "ragtag/kb.hpp"
#include "ragtag/model.hpp"
#include "ragtag/retrieval.hpp"
#include "ragtag/synth.hpp"
#include "ragtag/train.hpp"

namespace ragtag::pipeline {

namespace fs = std::filesystem;
using config::Config;
using json = nlohmann::json;

inline void require_artifact(const std::string& path, const std::string& what,
                             const std::string& produced_by) {
  if (!fs::exists(path))
    throw std::runtime_error("missing " + what + " at " + path + "; run `ragtag " + produced_by +
                             "` first");
}

inline void require_input(const std::string& path, const std::string& what) {
  if (path.empty()) throw std::runtime_error("config does not name a " + what);
  if (!fs::exists(path)) throw std::runtime_error(what + " not found: " + path);
}

/// Effective-config sidecar next to an artifact.
inline void write_meta(const std::string& artifact_path, const Config& cfg) {
  std::ofstream out(artifact_path + ".meta.json", std::ios::binary);
  out << cfg.to_json().dump(2) << '\n';
}

// ---- ingest ----

inline void run_ingest(const Config& cfg, std::ostream& log = std::cout) {
  if (cfg.paths.kb_docs.empty() && cfg.paths.kb_entities.empty())
    throw std::runtime_error("config names no kb_docs or kb_entities to ingest");
  auto store = kb::KbStore::open(cfg.store_dir());
  for (const auto& ref : cfg.paths.kb_docs) {
    require_input(ref.path, "document file");
    const auto stats = store.ingest_documents(ref.path, ref.language);
    for (const auto& w : stats.warnings) log << "warning: " << w << '\n';
    log << "ingested " << stats.ingested << " documents (" << stats.skipped << " skipped) from "
        << ref.path << " [" << ref.language << "]\n";
  }
  for (const auto& ref : cfg.paths.kb_entities) {
    require_input(ref.path, "entity file");
    const auto stats = store.ingest_entities(ref.path, ref.language);
    for (const auto& w : stats.warnings) log << "warning: " << w << '\n';
    log << "ingested " << stats.ingested << " entities (" << stats.skipped << " skipped) from "
        << ref.path << " [" << ref.language << "]\n";
  }
  write_meta((fs::path(cfg.store_dir()) / "store").string(), cfg);
}

// ---- index ----

inline void run_index(const Config& cfg, std::ostream& log = std::cout) {
  require_artifact((fs::path(cfg.store_dir()) / "meta.json").string(), "kb store", "ingest");
  auto store = kb::KbStore::open(cfg.store_dir());
  fs::create_directories(fs::path(cfg.doc_index_path("x")).parent_path());

  for (const auto& lang : store.document_languages()) {
    auto di = bm25::DocIndex::build(store.documents(lang), lang);
    di.save(cfg.doc_index_path(lang));
    write_meta(cfg.doc_index_path(lang), cfg);
    log << "doc index [" << lang << "]: " << di.docs.size() << " documents, avgdl "
        << di.index.avg_doc_len() << '\n';
  }
  for (const auto& lang : store.entity_languages()) {
    const auto ents = store.entities(lang);
    auto ei = bm25::EntityIndex::build(ents, lang);
    ei.save(cfg.entity_index_path(lang));
    write_meta(cfg.entity_index_path(lang), cfg);
    log << "entity index [" << lang << "]: " << ei.entries.size() << " entities\n";
    if (cfg.retrieval.text2ent == "dense") {
      const embed::TrigramEmbedder embedder(cfg.retrieval.dense_dim);
      auto dd = embed::DenseIndex::build(ents, embedder);
      dd.save(cfg.dense_index_path(lang));
      write_meta(cfg.dense_index_path(lang), cfg);
      log << "dense index [" << lang << "]: dim " << dd.dim << '\n';
    }
  }
}

// ---- retrieve ----

struct RetrievalStack {
  std::optional<bm25::DocIndex> docs;
  std::optional<bm25::EntityIndex> entities;
  std::optional<embed::DenseIndex> dense;
  std::optional<embed::TrigramEmbedder> embedder;
  kb::EntityCatalog catalog;
};

inline RetrievalStack load_retrieval_stack(const Config& cfg) {
  RetrievalStack stack;
  const std::string& lang = cfg.language;
  if (cfg.retrieval.text2text) {
    require_artifact(cfg.doc_index_path(lang), "document index", "index");
    stack.docs = bm25::DocIndex::load(cfg.doc_index_path(lang));
  }
  if (cfg.retrieval.text2ent == "sparse") {
    require_artifact(cfg.entity_index_path(lang), "entity index", "index");
    stack.entities = bm25::EntityIndex::load(cfg.entity_index_path(lang));
  } else if (cfg.retrieval.text2ent == "dense") {
    require_artifact(cfg.dense_index_path(lang), "dense entity index", "index");
    stack.dense = embed::DenseIndex::load(cfg.dense_index_path(lang));
    stack.embedder.emplace(stack.dense->dim);
  }
  if (cfg.retrieval.ent2ent) {
    require_artifact((fs::path(cfg.store_dir()) / "meta.json").string(), "kb store", "ingest");
    auto store = kb::KbStore::open(cfg.store_dir());
    for (const auto& l : store.entity_languages()) stack.catalog.add(store.entity_lookup(l));
  }
  return stack;
}

inline retrieval::ContextBundle build_bundle(const Config& cfg, const RetrievalStack& stack,
                                             const Sentence& sentence) {
  const bm25::Bm25Params params{cfg.retrieval.bm25_k1, cfg.retrieval.bm25_b};
  std::vector<std::string> texts;
  if (stack.docs && cfg.retrieval.text2text)
    texts = retrieval::text2text(*stack.docs, sentence, cfg.retrieval.text2text_k, params);

  std::vector<std::string> candidates;
  if (cfg.retrieval.text2ent == "sparse" && stack.entities)
    candidates = retrieval::text2ent_sparse(*stack.entities, sentence, cfg.retrieval.text2ent_k,
                                            cfg.retrieval.max_iters, params);
  else if (cfg.retrieval.text2ent == "dense" && stack.dense)
    candidates =
        retrieval::dense_retrieve(*stack.embedder, *stack.dense, sentence, cfg.retrieval.text2ent_k);

  std::vector<retrieval::EntResult> ents;
  std::vector<std::string> bare;
  if (cfg.retrieval.ent2ent)
    ents = retrieval::ent2ent(stack.catalog, candidates, cfg.language);
  else
    bare = candidates;

  auto bundle = retrieval::assemble_bundle(sentence, texts, ents, cfg.retrieval.slice_limit,
                                           cfg.retrieval.entity_first, bare);
  bundle.candidates = candidates;
  return bundle;
}

/// Deterministic parallel map: worker t handles indices with i % jobs == t
/// and writes into a preallocated slot, so output never depends on jobs.
inline std::vector<retrieval::ContextBundle> build_bundles(const Config& cfg,
                                                           const RetrievalStack& stack,
                                                           const Corpus& corpus) {
  std::vector<retrieval::ContextBundle> out(corpus.size());
  const int jobs = std::max(1, cfg.jobs);
  if (jobs == 1) {
    for (std::size_t i = 0; i < corpus.size(); ++i)
      out[i] = build_bundle(cfg, stack, corpus[i].first);
    return out;
  }
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
  for (int t = 0; t < jobs; ++t)
    workers.emplace_back([&, t] {
      try {
        for (std::size_t i = static_cast<std::size_t>(t); i < corpus.size();
             i += static_cast<std::size_t>(jobs))
          out[i] = build_bundle(cfg, stack, corpus[i].first);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  for (auto& w : workers) w.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

inline void run_retrieve(const Config& cfg, std::ostream& log = std::cout) {
  std::vector<std::string> corpora;
  for (const auto& ref : cfg.paths.train) corpora.push_back(ref.path);
  if (!cfg.paths.eval.empty()) corpora.push_back(cfg.paths.eval);
  if (corpora.empty()) throw std::runtime_error("config names no corpora to retrieve for");

  const auto stack = load_retrieval_stack(cfg);
  fs::create_directories(cfg.bundle_dir());
  for (const auto& path : corpora) {
    require_input(path, "corpus file");
    const auto corpus = read_corpus(path, cfg.language);
    const auto bundles = build_bundles(cfg, stack, corpus);
    const auto cache = cfg.bundle_path(path);
    retrieval::write_bundles(cache, bundles);
    write_meta(cache, cfg);
    log << "bundles: " << bundles.size() << " sentences -> " << cache << '\n';
  }
}

// ---- train ----

inline bool run_train(const Config& cfg, std::ostream& log = std::cout) {
  if (cfg.paths.train.empty()) throw std::runtime_error("config names no training corpora");
  const auto mode = model::mode_from_string(cfg.model.mode);

  std::vector<train::SubCorpus> data;
  for (const auto& ref : cfg.paths.train) {
    require_input(ref.path, "training corpus");
    train::SubCorpus sub;
    sub.corpus = read_corpus(ref.path, cfg.language);
    sub.upsample = ref.upsample;
    if (mode != model::Mode::kBaseline) {
      require_artifact(cfg.bundle_path(ref.path), "bundle cache for " + ref.path, "retrieve");
      sub.bundles = retrieval::read_bundles(cfg.bundle_path(ref.path));
    }
    data.push_back(std::move(sub));
  }

  std::optional<model::ModelParams> init;
  if (!cfg.model.msf_init.empty()) {
    require_input(cfg.model.msf_init, "MSF init checkpoint");
    init = model::ModelParams::load(cfg.model.msf_init);
  }

  const auto result = train::train(cfg.train_config(), data, init ? &*init : nullptr);
  fs::create_directories(cfg.checkpoint_dir());
  result.params.save(cfg.checkpoint_path(cfg.model.seed));
  write_meta(cfg.checkpoint_path(cfg.model.seed), cfg);
  train::write_metrics_csv(cfg.metrics_path(cfg.model.seed), result.log);

  if (result.diverged) {
    log << "training diverged; kept the last finite checkpoint at "
        << cfg.checkpoint_path(cfg.model.seed) << '\n';
    return false;
  }
  log << "trained " << cfg.model.mode << " model (seed " << cfg.model.seed << "), "
      << result.log.size() << " steps";
  if (!result.log.empty()) log << ", final loss " << result.log.back().loss;
  log << " -> " << cfg.checkpoint_path(cfg.model.seed) << '\n';
  return true;
}

// ---- predict ----

inline void run_predict(const Config& cfg, std::ostream& log = std::cout) {
  require_input(cfg.paths.eval, "eval corpus");
  require_artifact(cfg.checkpoint_path(cfg.model.seed), "checkpoint", "train");
  const auto params = model::ModelParams::load(cfg.checkpoint_path(cfg.model.seed));
  const auto mode = model::mode_from_string(cfg.model.mode);
  const auto corpus = read_corpus(cfg.paths.eval, cfg.language);

  std::vector<retrieval::ContextBundle> bundles;
  if (mode != model::Mode::kBaseline) {
    require_artifact(cfg.bundle_path(cfg.paths.eval), "bundle cache for " + cfg.paths.eval,
                     "retrieve");
    bundles = retrieval::read_bundles(cfg.bundle_path(cfg.paths.eval));
    if (bundles.size() != corpus.size())
      throw std::runtime_error("bundle cache is stale: sentence count mismatch; rerun retrieve");
  }

  Corpus pred;
  pred.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto* bundle = bundles.empty() ? nullptr : &bundles[i];
    pred.emplace_back(corpus[i].first,
                      model::predict_tags(params, mode, corpus[i].first, bundle));
  }
  fs::create_directories(cfg.pred_dir());
  write_corpus(cfg.pred_path(cfg.model.seed), pred);
  write_meta(cfg.pred_path(cfg.model.seed), cfg);
  log << "predictions -> " << cfg.pred_path(cfg.model.seed) << '\n';
}

// ---- ensemble ----

inline void run_ensemble(const Config& cfg, std::vector<std::string> inputs,
                         std::string output, std::ostream& log = std::cout) {
  if (inputs.empty())
    for (auto seed : cfg.ensemble.seeds) inputs.push_back(cfg.pred_path(seed));
  if (output.empty()) output = cfg.ensemble_pred_path();
  std::vector<Corpus> corpora;
  for (const auto& path : inputs) {
    require_artifact(path, "prediction file", "predict");
    corpora.push_back(read_corpus(path, cfg.language));
  }
  const auto voted = ensemble::vote_corpora(corpora);
  fs::create_directories(fs::path(output).parent_path());
  write_corpus(output, voted);
  write_meta(output, cfg);
  log << "ensemble of " << corpora.size() << " models -> " << output << '\n';
}

// ---- evaluate ----

inline std::string default_prediction_path(const Config& cfg) {
  if (fs::exists(cfg.ensemble_pred_path())) return cfg.ensemble_pred_path();
  return cfg.pred_path(cfg.model.seed);
}

inline eval::EvalReport run_evaluate(const Config& cfg, std::string pred_path = "",
                                     std::ostream& log = std::cout) {
  require_input(cfg.paths.eval, "eval corpus");
  if (pred_path.empty()) pred_path = default_prediction_path(cfg);
  require_artifact(pred_path, "prediction file", "predict");

  const auto gold = read_corpus(cfg.paths.eval, cfg.language);
  const auto pred = read_corpus(pred_path, cfg.language);
  const auto report = eval::evaluate(gold, pred);

  fs::create_directories(cfg.report_dir());
  {
    std::ofstream out(fs::path(cfg.report_dir()) / "report.json", std::ios::binary);
    out << eval::report_json(report).dump(2) << '\n';
  }
  {
    std::ofstream out(fs::path(cfg.report_dir()) / "report.txt", std::ios::binary);
    out << eval::report_table(report);
  }
  write_meta((fs::path(cfg.report_dir()) / "report.json").string(), cfg);
  log << "micro F1 " << report.micro_f1() << " | macro F1 " << report.macro_f1()
      << " | mention F1 " << report.mention_f1 << " | typing " << report.typing_accuracy
      << '\n';
  return report;
}

// ---- analyze ----

struct AnalyzeResult {
  double coverage = 0.0;
  eval::InOutReport inout;
  std::map<std::string, double> iou_median;  // per strategy
  std::vector<eval::SweepRow> sweep;
};

inline AnalyzeResult run_analyze(const Config& cfg, std::ostream& log = std::cout) {
  require_input(cfg.paths.eval, "eval corpus");
  require_artifact(cfg.bundle_path(cfg.paths.eval), "bundle cache", "retrieve");
  const auto gold = read_corpus(cfg.paths.eval, cfg.language);
  const auto bundles = retrieval::read_bundles(cfg.bundle_path(cfg.paths.eval));
  const std::string pred_path = default_prediction_path(cfg);
  require_artifact(pred_path, "prediction file", "predict");
  const auto pred = read_corpus(pred_path, cfg.language);
  require_artifact(cfg.checkpoint_path(cfg.model.seed), "checkpoint", "train");
  const auto params = model::ModelParams::load(cfg.checkpoint_path(cfg.model.seed));

  fs::create_directories(cfg.report_dir());
  AnalyzeResult result;

  // entity coverage + per-sentence split sizes
  result.coverage = retrieval::entity_coverage(bundles, gold);
  const auto [in_idx, out_idx] = retrieval::split_in_out(bundles, gold);
  {
    json j;
    j["entity_coverage"] = result.coverage;
    j["in_context_sentences"] = in_idx.size();
    j["out_of_context_sentences"] = out_idx.size();
    std::ofstream out(fs::path(cfg.report_dir()) / "coverage.json", std::ios::binary);
    out << j.dump(2) << '\n';
  }

  // in/out-of-context strata
  result.inout = eval::in_out_report(gold, pred, bundles);
  {
    json j;
    j["in"] = eval::report_json(result.inout.in_context);
    j["out"] = eval::report_json(result.inout.out_of_context);
    j["ratio"] = json{{"in", result.inout.in_ratio}, {"out", result.inout.out_ratio}};
    std::ofstream out(fs::path(cfg.report_dir()) / "inout.json", std::ios::binary);
    out << j.dump(2) << '\n';
  }

  // query-result IoU per strategy
  {
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> pairs;
    for (std::size_t i = 0; i < bundles.size(); ++i) {
      std::string query;
      for (const auto& t : bundles[i].query.tokens) {
        if (!query.empty()) query += ' ';
        query += t;
      }
      for (const auto& s : bundles[i].segment_texts(retrieval::Source::kText2Text))
        pairs["text2text"].emplace_back(query, s);
      for (const auto& c : bundles[i].candidates) pairs["text2ent"].emplace_back(query, c);
      for (const auto& s : bundles[i].segment_texts(retrieval::Source::kEnt2Ent))
        pairs["ent2ent"].emplace_back(query, s);
    }
    std::ofstream csv(fs::path(cfg.report_dir()) / "iou_hist.csv", std::ios::binary);
    csv << "strategy,bin_lo,bin_hi,count\n";
    json medians;
    for (const auto& [strategy, ps] : pairs) {
      const auto hist = eval::iou_histogram(ps, cfg.analyze.iou_bins,
                                            cfg.analyze.iou_strip_whitespace);
      for (std::size_t b = 0; b < hist.size(); ++b) {
        const double lo = static_cast<double>(b) / static_cast<double>(hist.size());
        const double hi = static_cast<double>(b + 1) / static_cast<double>(hist.size());
        csv << strategy << ',' << lo << ',' << hi << ',' << hist[b] << '\n';
      }
      std::vector<double> vals;
      for (const auto& [q, r] : ps)
        vals.push_back(eval::char_iou(q, r, cfg.analyze.iou_strip_whitespace));
      result.iou_median[strategy] = eval::median(vals);
      medians[strategy] = result.iou_median[strategy];
    }
    std::ofstream out(fs::path(cfg.report_dir()) / "iou.json", std::ios::binary);
    out << json{{"median", medians}}.dump(2) << '\n';
  }

  // context-length sweep
  result.sweep = eval::context_length_sweep(params, model::mode_from_string(cfg.model.mode), gold,
                                            bundles, cfg.analyze.lengths);
  {
    std::ofstream csv(fs::path(cfg.report_dir()) / "sweep.csv", std::ios::binary);
    csv << "length,micro_f1,macro_f1\n";
    for (const auto& row : result.sweep)
      csv << row.length << ',' << row.micro_f1 << ',' << row.macro_f1 << '\n';
  }
  write_meta((fs::path(cfg.report_dir()) / "analyze").string(), cfg);

  log << "coverage " << result.coverage << " | in/out sentences " << in_idx.size() << "/"
      << out_idx.size() << " | sweep points " << result.sweep.size() << '\n';
  return result;
}

}  // namespace ragtag::pipeline
