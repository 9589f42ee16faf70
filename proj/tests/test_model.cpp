#include <catch2/catch.hpp>

#include <filesystem>
#include <cstring>
#include <random>

#include "ragtag/model.hpp"

using namespace ragtag;
using model::ModelConfig;
using model::ModelParams;
using nn::Mat;

namespace {

subword::Vocab tiny_vocab() {
  subword::VocabBuilder b;
  for (const char* w : {"the", "deal", "hudson", "was", "publisher", "kelda", "station",
                        "crew", "reached", "by", "night", "human", "a", "b", "c"})
    b.add(w);
  return b.finish(8192);
}

ModelParams tiny_params(std::uint64_t seed = 1, int d = 16, int layers = 1, int heads = 2) {
  ModelConfig cfg;
  cfg.d = d;
  cfg.layers = layers;
  cfg.heads = heads;
  cfg.max_positions = 128;
  return ModelParams::init(cfg, tiny_vocab(), seed);
}

retrieval::ContextBundle bundle_for(const Sentence& sent,
                                    const std::vector<std::string>& texts,
                                    const std::vector<retrieval::EntResult>& ents,
                                    std::size_t slice_limit) {
  return retrieval::assemble_bundle(sent, texts, ents, slice_limit);
}

}  // namespace

TEST_CASE("tag indexing round trip") {
  CHECK(model::kTagCount == 67);
  CHECK(model::tag_to_index("O") == 0);
  for (int i = 0; i < model::kTagCount; ++i)
    CHECK(model::tag_to_index(model::tag_from_index(i)) == i);
  CHECK_THROWS_AS(model::tag_from_index(67), std::invalid_argument);
}

TEST_CASE("vocab encodes known words as pieces and others as bytes") {
  const auto v = tiny_vocab();
  CHECK(v.encode_word("deal").size() == 1);
  const auto bytes = v.encode_word("zx");
  REQUIRE(bytes.size() == 2);
  CHECK(bytes[0] == subword::Vocab::kByteBase + 'z');
  CHECK(bytes[1] == subword::Vocab::kByteBase + 'x');
}

TEST_CASE("encode output shape and determinism") {
  const auto params = tiny_params();
  const Sentence sent({"deal", "hudson", "was", "publisher"}, "en");

  const Mat a = model::forward_baseline(params, sent);
  const Mat b = model::forward_baseline(params, sent);
  CHECK(a.rows() == 4);
  CHECK(a.cols() == model::kTagCount);
  CHECK((a - b).norm() == 0.0);  // deterministic across runs
}

TEST_CASE("encode rejects sequences beyond the position limit") {
  const auto params = tiny_params();
  std::vector<std::string> many(200, "deal");
  CHECK_THROWS_WITH(model::forward_baseline(params, Sentence(many, "en")),
                    Catch::Contains("position limit 128"));
}

TEST_CASE("spec encode surface with the two input modes") {
  const auto params = tiny_params();
  model::EncodedInput ids;
  ids.ids = {subword::Vocab::kPieceBase, subword::Vocab::kPieceBase + 1};
  const Mat h = model::encode(params, ids);
  CHECK(h.rows() == 2);
  CHECK(h.cols() == params.config.d);

  model::EncodedInput vecs;
  vecs.use_vectors = true;
  vecs.vectors = Mat::Random(3, params.config.d);
  CHECK(model::encode(params, vecs).rows() == 3);

  model::EncodedInput both;
  both.ids = {1};
  both.use_vectors = true;
  both.vectors = Mat::Zero(1, params.config.d);
  CHECK_THROWS_AS(model::encode(params, both), std::invalid_argument);
}

TEST_CASE("zero weights and embeddings produce identical rows") {
  auto params = tiny_params();
  for (Mat* m : params.parameters()) m->setZero();
  for (auto& blk : params.blocks) {
    blk.ln1_g.setOnes();
    blk.ln2_g.setOnes();
  }
  const Sentence sent({"deal", "hudson", "was"}, "en");
  const Mat h = model::forward_baseline(params, sent);
  for (Eigen::Index r = 1; r < h.rows(); ++r) CHECK((h.row(r) - h.row(0)).norm() == 0.0);
}

TEST_CASE("concat with empty context equals baseline with separator") {
  const auto params = tiny_params();
  const Sentence sent({"deal", "hudson"}, "en");
  const Mat concat = model::forward_concat(params, sent, {});
  const Mat base_sep = model::forward_baseline(params, sent, /*with_separator=*/true);
  CHECK((concat - base_sep).norm() == 0.0);
  const Mat base = model::forward_baseline(params, sent);
  CHECK((concat - base).norm() > 0.0);  // separator changes the pass
}

TEST_CASE("concat emissions depend on the context") {
  const auto params = tiny_params();
  const Sentence sent({"deal", "hudson"}, "en");
  const Mat a = model::forward_concat(params, sent, {"kelda", "station"});
  const Mat b = model::forward_concat(params, sent, {"kelda", "crew"});
  CHECK((a - b).norm() > 0.0);
  CHECK(a.rows() == 2);

  // shape is (n x T) regardless of context length
  const Mat c = model::forward_concat(params, sent, std::vector<std::string>(30, "night"));
  CHECK(c.rows() == 2);
  CHECK(c.cols() == model::kTagCount);
}

TEST_CASE("post-infusion with m = 0 is bit-identical to concat") {
  const auto params = tiny_params();
  const Sentence sent({"deal", "hudson"}, "en");
  const auto b = bundle_for(sent, {"the crew reached kelda station"}, {}, 16);
  REQUIRE(b.extra_contexts.empty());
  const Mat post = model::forward_post_infusion(params, b);
  const Mat concat = model::forward_concat(params, sent, b.primary_context);
  CHECK(std::memcmp(post.data(), concat.data(), sizeof(double) * post.size()) == 0);
}

TEST_CASE("post-infusion is invariant under extra-context permutation") {
  const auto params = tiny_params();
  const Sentence sent({"deal", "hudson"}, "en");
  auto b = bundle_for(sent, {"the crew reached kelda station by night the crew reached"
                             " kelda station by night deal hudson was publisher"},
                      {}, 8);
  REQUIRE(b.extra_contexts.size() >= 2);
  const Mat h1 = model::forward_post_infusion(params, b);
  std::swap(b.extra_contexts[0], b.extra_contexts[1]);
  const Mat h2 = model::forward_post_infusion(params, b);
  CHECK(std::memcmp(h1.data(), h2.data(), sizeof(double) * h1.size()) == 0);
}

TEST_CASE("every post-infusion coordinate comes from some pass") {
  const auto params = tiny_params();
  const Sentence sent({"deal", "hudson", "was"}, "en");
  auto b = bundle_for(sent, {"the crew reached kelda station by night and the deal hudson"
                             " profile was published by night crew"},
                      {}, 8);
  REQUIRE(!b.extra_contexts.empty());

  // audit h_max against the per-pass query representations
  auto query_rows = [&](const std::vector<std::string>& ctx) {
    nn::Tape tape;
    auto pv = model::bind_params(tape, params, false);
    const auto layout = model::layout_pair(params.vocab, sent, ctx);
    nn::Var h = model::encode_ids(tape, pv, params.config, layout.ids);
    return Mat(tape.gather_rows(h, layout.query_word_first).value());
  };
  std::vector<Mat> passes{query_rows(b.primary_context)};
  for (const auto& ctx : b.extra_contexts) passes.push_back(query_rows(ctx));

  Mat hmax = passes[0];
  for (const auto& p : passes) hmax = hmax.cwiseMax(p);
  for (Eigen::Index r = 0; r < hmax.rows(); ++r)
    for (Eigen::Index c = 0; c < hmax.cols(); ++c) {
      bool found = false;
      for (const auto& p : passes) found = found || p(r, c) == hmax(r, c);
      CHECK(found);
    }

  const Mat emis = model::forward_post_infusion(params, b);
  const Mat want = (hmax * params.emit_w).rowwise() + Eigen::RowVectorXd(params.emit_b.row(0));
  CHECK((emis - want).norm() < 1e-12);
}

TEST_CASE("pre-infusion without anchors is bit-identical to concat") {
  const auto params = tiny_params();
  const Sentence sent({"deal", "hudson"}, "en");
  const auto b = bundle_for(sent, {"the crew reached kelda station by night and more"
                                   " words beyond the slice limit spill over here"},
                            {}, 8);
  REQUIRE(!b.extra_contexts.empty());
  REQUIRE(b.anchors.empty());
  const Mat pre = model::forward_pre_infusion(params, b);
  const Mat concat = model::forward_concat(params, sent, b.primary_context);
  CHECK(std::memcmp(pre.data(), concat.data(), sizeof(double) * pre.size()) == 0);
}

TEST_CASE("pre-infusion anchor pooling") {
  const auto params = tiny_params();
  const Sentence sent({"deal", "hudson"}, "en");
  // force "kelda station" into an extra slice twice
  const std::string ctx =
      "a b c a b c a b kelda station crew night a b kelda station night crew";
  auto b = bundle_for(sent, {ctx}, {{"kelda station", {"human"}, ""}}, 8);

  std::vector<retrieval::Anchor> extra_anchors;
  for (const auto& a : b.anchors)
    if (a.context_index > 0) extra_anchors.push_back(a);
  // two text occurrences land in extra slice 1, the splice copy in slice 2
  REQUIRE(extra_anchors.size() == 3);

  const Mat pre = model::forward_pre_infusion(params, b);
  CHECK(pre.rows() == 2);
  CHECK(pre.cols() == model::kTagCount);

  SECTION("single occurrence vector equals the pooled row exactly") {
    // keep only the first extra-context anchor
    auto b_one = b;
    b_one.anchors.clear();
    for (const auto& a : b.anchors)
      if (a.context_index == extra_anchors[0].context_index && a.start == extra_anchors[0].start)
        b_one.anchors.push_back(a);
    REQUIRE(b_one.anchors.size() == 1);

    // recompute the occurrence rows by hand from the pair pass
    const auto& anchor = b_one.anchors[0];
    const auto& ctx_tokens = b_one.extra_contexts[anchor.context_index - 1];
    nn::Tape tape;
    auto pv = model::bind_params(tape, params, false);
    const auto layout = model::layout_pair(params.vocab, sent, ctx_tokens);
    nn::Var h = model::encode_ids(tape, pv, params.config, layout.ids);
    std::vector<int> rows;
    for (std::size_t w = anchor.start; w < anchor.end; ++w)
      for (int p : layout.ctx_word_pieces.at(w)) rows.push_back(p);
    Mat occurrence = tape.gather_rows(h, rows).value();
    Mat pooled = occurrence.colwise().mean();

    // the appended anchor row reproduces through the main pass: compare
    // against a direct reconstruction of the pre-infusion input
    const auto main_layout = model::layout_pair(params.vocab, sent, b_one.primary_context);
    nn::Tape tape2;
    auto pv2 = model::bind_params(tape2, params, false);
    nn::Var id_rows = tape2.gather_rows(pv2.tok_emb, main_layout.ids);
    nn::Var input_rows = tape2.concat_rows({id_rows, tape2.leaf(pooled, false)});
    nn::Var h2 = model::encode_rows(tape2, pv2, params.config, input_rows);
    nn::Var sel = tape2.gather_rows(h2, main_layout.query_word_first);
    Mat want = (sel.value() * params.emit_w).rowwise() + Eigen::RowVectorXd(params.emit_b.row(0));

    const Mat got = model::forward_pre_infusion(params, b_one);
    CHECK((got - want).norm() == 0.0);
  }

  SECTION("multiple occurrences pool to their elementwise mean") {
    // all occurrences of the surface stack into one V row; verify against
    // a manual recomputation of the mean
    nn::Tape tape;
    auto pv = model::bind_params(tape, params, false);
    std::vector<Mat> occ_rows;
    Eigen::Index total_rows = 0;
    for (const auto& a : extra_anchors) {
      const auto& ctx_tokens = b.extra_contexts[a.context_index - 1];
      const auto layout = model::layout_pair(params.vocab, sent, ctx_tokens);
      nn::Var h = model::encode_ids(tape, pv, params.config, layout.ids);
      std::vector<int> rows;
      for (std::size_t w = a.start; w < a.end; ++w)
        for (int p : layout.ctx_word_pieces.at(w)) rows.push_back(p);
      occ_rows.push_back(tape.gather_rows(h, rows).value());
      total_rows += occ_rows.back().rows();
    }
    Mat stacked(total_rows, occ_rows[0].cols());
    Eigen::Index at = 0;
    for (const auto& o : occ_rows) {
      stacked.middleRows(at, o.rows()) = o;
      at += o.rows();
    }
    const Mat mean_row = stacked.colwise().mean();

    const auto main_layout = model::layout_pair(params.vocab, sent, b.primary_context);
    nn::Tape tape2;
    auto pv2 = model::bind_params(tape2, params, false);
    nn::Var id_rows = tape2.gather_rows(pv2.tok_emb, main_layout.ids);
    nn::Var input_rows = tape2.concat_rows({id_rows, tape2.leaf(mean_row, false)});
    nn::Var h2 = model::encode_rows(tape2, pv2, params.config, input_rows);
    nn::Var sel = tape2.gather_rows(h2, main_layout.query_word_first);
    Mat want = (sel.value() * params.emit_w).rowwise() + Eigen::RowVectorXd(params.emit_b.row(0));

    const Mat got = model::forward_pre_infusion(params, b);
    CHECK((got - want).norm() < 1e-9);
  }
}

TEST_CASE("checkpoint round trip is bit exact") {
  const auto params = tiny_params(99);
  const auto path = std::filesystem::temp_directory_path() / "ragtag_ckpt_test.bin";
  params.save(path.string());
  const auto loaded = ModelParams::load(path.string());
  std::filesystem::remove(path);
  CHECK(model::bit_equal(params, loaded));
  CHECK(loaded.config.d == params.config.d);
  CHECK(loaded.vocab == params.vocab);
}

TEST_CASE("predict produces well-formed tags") {
  const auto params = tiny_params();
  const Sentence sent({"deal", "hudson", "was", "publisher"}, "en");
  const auto tags = model::predict_tags(params, model::Mode::kBaseline, sent, nullptr);
  REQUIRE(tags.size() == 4);
  const auto spans = bio_decode(tags);  // throws on malformed tags
  for (const auto& s : spans) CHECK(s.end <= 4);
}
