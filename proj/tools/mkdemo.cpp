// mkdemo: writes a self-contained demo dataset (synthetic corpus + KB
// files) and a ready-to-run pipeline config into a directory.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "ragtag/config.hpp"
#include "ragtag/synth.hpp"

int main(int argc, char** argv) {
  CLI::App app{"write a demo dataset and config for the ragtag pipeline"};
  std::string out_dir = "demo";
  ragtag::synth::SynthSpec spec;
  spec.n_entities = 120;
  spec.n_train = 50;
  spec.n_eval = 25;
  app.add_option("-o,--out", out_dir, "output directory");
  app.add_option("--seed", spec.seed, "generator seed");
  app.add_option("--entities", spec.n_entities, "synthetic KB size");
  app.add_option("--train", spec.n_train, "training sentences");
  app.add_option("--eval", spec.n_eval, "eval sentences");
  app.add_option("--doc-coverage", spec.doc_coverage, "fraction of entities with a document");
  app.add_option("--kb-miss", spec.kb_miss, "fraction of entities absent from the KB");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto data = ragtag::synth::generate(spec);
    const auto files = ragtag::synth::write_files(data, out_dir);
    auto abs = [](const std::string& p) { return std::filesystem::absolute(p).string(); };

    ragtag::config::Config cfg;
    cfg.language = spec.language;
    cfg.paths.kb_docs = {{abs(files.docs), spec.language}};
    cfg.paths.kb_entities = {{abs(files.entities), spec.language}};
    cfg.paths.train = {{abs(files.train), 1}};
    cfg.paths.eval = abs(files.eval);
    cfg.paths.work_dir = abs((std::filesystem::path(out_dir) / "work").string());
    cfg.retrieval.text2text_k = 3;
    cfg.retrieval.text2ent_k = 4;
    cfg.retrieval.max_iters = 2;
    cfg.retrieval.slice_limit = 48;
    cfg.retrieval.entity_first = true;
    cfg.model.mode = "post";
    cfg.model.d = 32;
    cfg.model.layers = 2;
    cfg.model.heads = 2;
    cfg.model.max_positions = 256;
    cfg.model.epochs = 60;
    cfg.model.lr = 5e-3;
    cfg.model.batch_schedule = {{0, 8}};
    cfg.model.vocab_cap = 2048;
    cfg.ensemble.seeds = {1, 2, 3};
    cfg.analyze.lengths = {0, 8, 24, 48};

    const auto cfg_path = std::filesystem::path(out_dir) / "config.json";
    std::ofstream out(cfg_path, std::ios::binary);
    out << cfg.to_json().dump(2) << '\n';

    std::cout << "demo data in " << out_dir << ": " << data.train.size() << " train / "
              << data.eval.size() << " eval sentences, " << data.entities.size()
              << " KB entities, " << data.documents.size() << " documents\n"
              << "config: " << cfg_path.string() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
