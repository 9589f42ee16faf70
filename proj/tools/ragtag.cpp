// ragtag: batch CLI over the retrieval-augmented tagging pipeline.
// Stages: ingest | index | retrieve | train | predict | ensemble |
// evaluate | analyze. Each stage reads/writes only the documented
// artifacts under the configured work directory.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ragtag/config.hpp"
#include "ragtag/pipeline.hpp"

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<int> epochs;
  std::optional<std::string> msf_init;
  std::optional<double> bm25_k1, bm25_b;
  std::optional<std::size_t> slice_limit;
  std::optional<int> jobs;
  std::optional<std::string> work_dir;
};

void apply(const Overrides& ov, ragtag::config::Config& cfg) {
  if (ov.seed) cfg.model.seed = *ov.seed;
  if (ov.mode) cfg.model.mode = *ov.mode;
  if (ov.epochs) cfg.model.epochs = *ov.epochs;
  if (ov.msf_init) cfg.model.msf_init = *ov.msf_init;
  if (ov.bm25_k1) cfg.retrieval.bm25_k1 = *ov.bm25_k1;
  if (ov.bm25_b) cfg.retrieval.bm25_b = *ov.bm25_b;
  if (ov.slice_limit) cfg.retrieval.slice_limit = *ov.slice_limit;
  if (ov.jobs) cfg.jobs = *ov.jobs;
  if (ov.work_dir) cfg.paths.work_dir = *ov.work_dir;
  ragtag::model::mode_from_string(cfg.model.mode);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"retrieval-augmented fine-grained sequence tagging pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  Overrides ov;
  app.add_option("-c,--config", config_path, "pipeline config (JSON)")->required();
  app.add_option("--seed", ov.seed, "override model.seed");
  app.add_option("--mode", ov.mode, "override model.mode (baseline|concat|pre|post)");
  app.add_option("--epochs", ov.epochs, "override model.epochs");
  app.add_option("--msf-init", ov.msf_init, "checkpoint whose embeddings seed this run");
  app.add_option("--bm25-k1", ov.bm25_k1, "override BM25 k1");
  app.add_option("--bm25-b", ov.bm25_b, "override BM25 b");
  app.add_option("--slice-limit", ov.slice_limit, "override retrieval.slice_limit");
  app.add_option("--jobs", ov.jobs, "worker threads for the retrieve stage");
  app.add_option("--work-dir", ov.work_dir, "override paths.work_dir");

  auto* ingest = app.add_subcommand("ingest", "load KB documents and entities into the store")->fallthrough();
  auto* index = app.add_subcommand("index", "build BM25 (and dense) indexes from the store")->fallthrough();
  auto* retrieve = app.add_subcommand("retrieve", "build and cache context bundles per corpus")->fallthrough();
  auto* train = app.add_subcommand("train", "train a tagger; writes checkpoint + metrics csv")->fallthrough();
  auto* predict = app.add_subcommand("predict", "tag the eval corpus with a trained checkpoint")->fallthrough();
  auto* ens = app.add_subcommand("ensemble", "majority-vote prediction files into one")->fallthrough();
  auto* evaluate = app.add_subcommand("evaluate", "score predictions against the eval corpus")->fallthrough();
  auto* analyze =
      app.add_subcommand("analyze", "coverage, in/out split, IoU histogram and length sweep")
          ->fallthrough();

  std::vector<std::string> ens_inputs;
  std::string ens_output;
  ens->add_option("--inputs", ens_inputs, "prediction files (default: per ensemble.seeds)");
  ens->add_option("--output", ens_output, "output prediction file");

  std::string eval_pred;
  evaluate->add_option("--pred", eval_pred, "prediction file (default: ensemble, then seed)");

  CLI11_PARSE(app, argc, argv);

  try {
    auto cfg = ragtag::config::load_config(config_path);
    apply(ov, cfg);

    if (ingest->parsed()) {
      ragtag::pipeline::run_ingest(cfg);
    } else if (index->parsed()) {
      ragtag::pipeline::run_index(cfg);
    } else if (retrieve->parsed()) {
      ragtag::pipeline::run_retrieve(cfg);
    } else if (train->parsed()) {
      if (!ragtag::pipeline::run_train(cfg)) {
        std::cerr << "error: training diverged (loss went non-finite)\n";
        return 3;
      }
    } else if (predict->parsed()) {
      ragtag::pipeline::run_predict(cfg);
    } else if (ens->parsed()) {
      ragtag::pipeline::run_ensemble(cfg, ens_inputs, ens_output);
    } else if (evaluate->parsed()) {
      ragtag::pipeline::run_evaluate(cfg, eval_pred);
    } else if (analyze->parsed()) {
      ragtag::pipeline::run_analyze(cfg);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
