#pragma once

// Trainable contextual encoder + CRF tagger with four forward variants:
//   baseline  - query only
//   concat     - [query ; SEP ; primary context], query positions scored
//   pre       - anchor vectors pooled from extra-context passes are
//               appended to the main pass as embedding-level input rows
//   post      - per-pass query representations merged by elementwise max
// The embedding layer has two input modes (vocabulary ids and raw vector
// rows); emissions are read at the first piece of each query word.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ragtag/autograd.hpp"
#include "ragtag/core.hpp"
#include "ragtag/crf.hpp"
#include "ragtag/retrieval.hpp"
#include "ragtag/serial.hpp"
#include "ragtag/subword.hpp"
#include "ragtag/text.hpp"

namespace ragtag::model {

using nn::Mat;
using nn::Tape;
using nn::Var;

// ---- tag indexing: O = 0, B-f = 1+2f, I-f = 2+2f ----

constexpr int kTagCount = 1 + 2 * static_cast<int>(Taxonomy::kFineCount);  // 67

inline int tag_to_index(const std::string& tag) {
  auto [kind, fine] = parse_tag(tag);
  if (kind == 'O') return 0;
  return (kind == 'B' ? 1 : 2) + 2 * static_cast<int>(fine);
}

inline std::string tag_from_index(int idx) {
  if (idx == 0) return "O";
  if (idx < 0 || idx >= kTagCount) throw std::invalid_argument("tag index out of range");
  const int fine = (idx - 1) / 2;
  const bool begin = ((idx - 1) % 2) == 0;
  return (begin ? "B-" : "I-") + Taxonomy::instance().fine_name(static_cast<FineId>(fine));
}

inline std::vector<int> tags_to_indices(const TagSequence& tags) {
  std::vector<int> out;
  out.reserve(tags.size());
  for (const auto& t : tags) out.push_back(tag_to_index(t));
  return out;
}

// ---- parameters ----

struct ModelConfig {
  int d = 64;
  int layers = 2;
  int heads = 2;
  int max_positions = 512;
};

struct Block {
  Mat wq, bq, wk, bk, wv, bv, wo, bo;  // attention maps, d x d and 1 x d
  Mat w1, b1, w2, b2;                  // feed-forward d -> 4d -> d
  Mat ln1_g, ln1_b, ln2_g, ln2_b;      // layer-norm pairs, 1 x d
};

constexpr std::uint32_t kCheckpointVersion = 1;

struct ModelParams {
  ModelConfig config;
  subword::Vocab vocab;
  Mat tok_emb;  // V x d
  Mat pos_emb;  // P x d
  std::vector<Block> blocks;
  Mat emit_w;  // d x T
  Mat emit_b;  // 1 x T
  Mat trans;   // (T+2) x (T+2)

  static ModelParams init(const ModelConfig& config, subword::Vocab vocab, std::uint64_t seed) {
    if (config.d % config.heads != 0)
      throw std::invalid_argument("hidden size must divide evenly over heads");
    ModelParams p;
    p.config = config;
    p.vocab = std::move(vocab);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 0.02);
    auto randm = [&](Eigen::Index r, Eigen::Index c) {
      Mat m(r, c);
      for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = dist(rng);
      return m;
    };
    const int d = config.d;
    p.tok_emb = randm(p.vocab.size(), d);
    p.pos_emb = randm(config.max_positions, d);
    p.blocks.resize(static_cast<std::size_t>(config.layers));
    for (auto& b : p.blocks) {
      b.wq = randm(d, d), b.wk = randm(d, d), b.wv = randm(d, d), b.wo = randm(d, d);
      b.bq = Mat::Zero(1, d), b.bk = Mat::Zero(1, d), b.bv = Mat::Zero(1, d), b.bo = Mat::Zero(1, d);
      b.w1 = randm(d, 4 * d), b.b1 = Mat::Zero(1, 4 * d);
      b.w2 = randm(4 * d, d), b.b2 = Mat::Zero(1, d);
      b.ln1_g = Mat::Ones(1, d), b.ln1_b = Mat::Zero(1, d);
      b.ln2_g = Mat::Ones(1, d), b.ln2_b = Mat::Zero(1, d);
    }
    p.emit_w = randm(d, kTagCount);
    p.emit_b = Mat::Zero(1, kTagCount);
    p.trans = Mat::Zero(kTagCount + 2, kTagCount + 2);
    return p;
  }

  /// All trainable matrices in a stable order (optimizer state aligns to it).
  std::vector<Mat*> parameters() {
    std::vector<Mat*> out{&tok_emb, &pos_emb};
    for (auto& b : blocks)
      for (Mat* m : {&b.wq, &b.bq, &b.wk, &b.bk, &b.wv, &b.bv, &b.wo, &b.bo, &b.w1, &b.b1,
                     &b.w2, &b.b2, &b.ln1_g, &b.ln1_b, &b.ln2_g, &b.ln2_b})
        out.push_back(m);
    out.push_back(&emit_w);
    out.push_back(&emit_b);
    out.push_back(&trans);
    return out;
  }

  std::vector<const Mat*> parameters() const {
    auto mut = const_cast<ModelParams*>(this)->parameters();
    return {mut.begin(), mut.end()};
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << "RGCKP1";
    serial::put_u32(out, kCheckpointVersion);
    serial::put_u32(out, static_cast<std::uint32_t>(config.d));
    serial::put_u32(out, static_cast<std::uint32_t>(config.layers));
    serial::put_u32(out, static_cast<std::uint32_t>(config.heads));
    serial::put_u32(out, static_cast<std::uint32_t>(config.max_positions));
    serial::put_u64(out, vocab.pieces().size());
    for (const auto& piece : vocab.pieces()) serial::put_str(out, piece);
    for (const Mat* m : parameters()) {
      serial::put_u64(out, static_cast<std::uint64_t>(m->rows()));
      serial::put_u64(out, static_cast<std::uint64_t>(m->cols()));
      serial::put_f64s(out, m->data(), static_cast<std::size_t>(m->size()));
    }
  }

  static ModelParams load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    serial::check_magic(in, "RGCKP1", path);
    if (serial::get_u32(in) != kCheckpointVersion)
      throw std::runtime_error("checkpoint version mismatch: " + path);
    ModelConfig cfg;
    cfg.d = static_cast<int>(serial::get_u32(in));
    cfg.layers = static_cast<int>(serial::get_u32(in));
    cfg.heads = static_cast<int>(serial::get_u32(in));
    cfg.max_positions = static_cast<int>(serial::get_u32(in));
    const std::uint64_t np = serial::get_u64(in);
    std::vector<std::string> pieces(np);
    for (auto& piece : pieces) piece = serial::get_str(in);
    ModelParams p = init(cfg, subword::Vocab::from_pieces(std::move(pieces)), 0);
    for (Mat* m : p.parameters()) {
      const auto r = static_cast<Eigen::Index>(serial::get_u64(in));
      const auto c = static_cast<Eigen::Index>(serial::get_u64(in));
      m->resize(r, c);
      serial::get_f64s(in, m->data(), static_cast<std::size_t>(m->size()));
    }
    return p;
  }
};

inline bool bit_equal(const ModelParams& a, const ModelParams& b) {
  auto pa = a.parameters();
  auto pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i]->rows() != pb[i]->rows() || pa[i]->cols() != pb[i]->cols()) return false;
    if (std::memcmp(pa[i]->data(), pb[i]->data(),
                    sizeof(double) * static_cast<std::size_t>(pa[i]->size())) != 0)
      return false;
  }
  return a.vocab == b.vocab;
}

// ---- tape-level forward ----

struct BlockVars {
  Var wq, bq, wk, bk, wv, bv, wo, bo, w1, b1, w2, b2, ln1_g, ln1_b, ln2_g, ln2_b;
};

struct ParamVars {
  Var tok_emb, pos_emb;
  std::vector<BlockVars> blocks;
  Var emit_w, emit_b, trans;
  std::vector<Var> flat;  // same order as ModelParams::parameters()
};

inline ParamVars bind_params(Tape& tape, const ModelParams& p, bool requires_grad) {
  ParamVars v;
  auto reg = [&](const Mat& m) {
    Var var = tape.leaf(m, requires_grad);
    v.flat.push_back(var);
    return var;
  };
  v.tok_emb = reg(p.tok_emb);
  v.pos_emb = reg(p.pos_emb);
  for (const auto& b : p.blocks) {
    BlockVars bv;
    bv.wq = reg(b.wq), bv.bq = reg(b.bq), bv.wk = reg(b.wk), bv.bk = reg(b.bk);
    bv.wv = reg(b.wv), bv.bv = reg(b.bv), bv.wo = reg(b.wo), bv.bo = reg(b.bo);
    bv.w1 = reg(b.w1), bv.b1 = reg(b.b1), bv.w2 = reg(b.w2), bv.b2 = reg(b.b2);
    bv.ln1_g = reg(b.ln1_g), bv.ln1_b = reg(b.ln1_b), bv.ln2_g = reg(b.ln2_g), bv.ln2_b = reg(b.ln2_b);
    v.blocks.push_back(bv);
  }
  v.emit_w = reg(p.emit_w);
  v.emit_b = reg(p.emit_b);
  v.trans = reg(p.trans);
  return v;
}

struct ForwardOpts {
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;
};

namespace detail {

inline Var maybe_dropout(Tape& tape, Var x, const ForwardOpts& opts) {
  if (opts.dropout <= 0.0) return x;
  if (!opts.rng) throw std::invalid_argument("dropout requires an RNG");
  return tape.dropout(x, opts.dropout, *opts.rng);
}

inline Var encoder_block(Tape& tape, const BlockVars& b, const ModelConfig& cfg, Var x,
                         const ForwardOpts& opts) {
  const int dh = cfg.d / cfg.heads;
  Var q = tape.add_rowvec(tape.matmul(x, b.wq), b.bq);
  Var k = tape.add_rowvec(tape.matmul(x, b.wk), b.bk);
  Var v = tape.add_rowvec(tape.matmul(x, b.wv), b.bv);
  std::vector<Var> heads;
  for (int h = 0; h < cfg.heads; ++h) {
    Var qh = tape.slice_cols(q, h * dh, dh);
    Var kh = tape.slice_cols(k, h * dh, dh);
    Var vh = tape.slice_cols(v, h * dh, dh);
    Var scores = tape.scale(tape.matmul_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(dh)));
    Var attn = tape.softmax_rows(scores);
    heads.push_back(tape.matmul(attn, vh));
  }
  Var merged = cfg.heads == 1 ? heads[0] : tape.concat_cols(heads);
  Var attn_out = tape.add_rowvec(tape.matmul(merged, b.wo), b.bo);
  attn_out = maybe_dropout(tape, attn_out, opts);
  Var x1 = tape.layer_norm_rows(tape.add(x, attn_out), b.ln1_g, b.ln1_b);
  Var ff = tape.add_rowvec(
      tape.matmul(tape.gelu(tape.add_rowvec(tape.matmul(x1, b.w1), b.b1)), b.w2), b.b2);
  ff = maybe_dropout(tape, ff, opts);
  return tape.layer_norm_rows(tape.add(x1, ff), b.ln2_g, b.ln2_b);
}

inline void check_length(Eigen::Index len, const ModelConfig& cfg) {
  if (len > cfg.max_positions)
    throw std::invalid_argument("sequence length " + std::to_string(len) +
                                " exceeds position limit " +
                                std::to_string(cfg.max_positions));
}

inline std::vector<int> iota_ids(Eigen::Index n) {
  std::vector<int> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = static_cast<int>(i);
  return out;
}

}  // namespace detail

/// Runs the block stack over already-embedded input rows (positions added
/// here, starting at 0).
inline Var encode_rows(Tape& tape, const ParamVars& pv, const ModelConfig& cfg, Var rows,
                       const ForwardOpts& opts = {}) {
  detail::check_length(rows.rows(), cfg);
  Var pos = tape.gather_rows(pv.pos_emb, detail::iota_ids(rows.rows()));
  Var x = tape.add(rows, pos);
  x = detail::maybe_dropout(tape, x, opts);
  for (const auto& b : pv.blocks) x = detail::encoder_block(tape, b, cfg, x, opts);
  return x;
}

inline Var encode_ids(Tape& tape, const ParamVars& pv, const ModelConfig& cfg,
                      const std::vector<int>& ids, const ForwardOpts& opts = {}) {
  detail::check_length(static_cast<Eigen::Index>(ids.size()), cfg);
  Var rows = tape.gather_rows(pv.tok_emb, ids);
  return encode_rows(tape, pv, cfg, rows, opts);
}

// ---- spec-surface encode() with the two input modes ----

struct EncodedInput {
  std::vector<int> ids;  // vocabulary-index mode
  Mat vectors;           // word-embedding mode (rows)
  bool use_vectors = false;
  int query_len = 0;  // segment boundary n (pieces)
};

/// Deterministic forward pass; returns one representation row per input
/// position.
inline Mat encode(const ModelParams& params, const EncodedInput& input) {
  if (input.use_vectors == !input.ids.empty())
    throw std::invalid_argument("EncodedInput: exactly one of ids/vectors must be set");
  Tape tape;
  ParamVars pv = bind_params(tape, params, false);
  Var h = input.use_vectors
              ? encode_rows(tape, pv, params.config, tape.leaf(input.vectors, false))
              : encode_ids(tape, pv, params.config, input.ids);
  return h.value();
}

// ---- sentence/context layout ----

struct PairLayout {
  std::vector<int> ids;                        // [query pieces] SEP [context pieces]
  std::vector<int> query_word_first;           // one position per query word
  std::vector<std::vector<int>> ctx_word_pieces;  // positions per context word
};

inline PairLayout layout_pair(const subword::Vocab& vocab, const Sentence& query,
                              const std::vector<std::string>& context) {
  PairLayout out;
  const auto q = subword::encode_words(vocab, query.tokens);
  out.ids = q.ids;
  out.query_word_first = q.word_first;
  out.ids.push_back(subword::Vocab::kSep);
  const auto c = subword::encode_words(vocab, context);
  const int off = static_cast<int>(q.ids.size()) + 1;
  for (const auto& positions : c.word_pieces) {
    std::vector<int> shifted;
    for (int p : positions) shifted.push_back(p + off);
    out.ctx_word_pieces.push_back(std::move(shifted));
  }
  for (int id : c.ids) out.ids.push_back(id);
  return out;
}

enum class Mode { kBaseline, kConcat, kPre, kPost };

inline Mode mode_from_string(const std::string& s) {
  if (s == "baseline") return Mode::kBaseline;
  if (s == "concat") return Mode::kConcat;
  if (s == "pre") return Mode::kPre;
  if (s == "post") return Mode::kPost;
  throw std::invalid_argument("unknown model mode: " + s);
}

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::kBaseline: return "baseline";
    case Mode::kConcat: return "concat";
    case Mode::kPre: return "pre";
    case Mode::kPost: return "post";
  }
  return "?";
}

// ---- the four forwards (tape level) ----

/// Query-only pass. `with_separator` appends the SEP token so the layout
/// matches a context pass with an empty context.
inline Var forward_baseline_t(Tape& tape, const ParamVars& pv, const ModelParams& params,
                              const Sentence& sentence, const ForwardOpts& opts = {},
                              bool with_separator = false) {
  auto enc = subword::encode_words(params.vocab, sentence.tokens);
  std::vector<int> ids = enc.ids;
  if (with_separator) ids.push_back(subword::Vocab::kSep);
  Var h = encode_ids(tape, pv, params.config, ids, opts);
  Var sel = tape.gather_rows(h, enc.word_first);
  return tape.add_rowvec(tape.matmul(sel, pv.emit_w), pv.emit_b);
}

/// Concatenated [query ; SEP ; context] pass, emissions at query words.
inline Var forward_concat_t(Tape& tape, const ParamVars& pv, const ModelParams& params,
                           const Sentence& sentence, const std::vector<std::string>& context,
                           const ForwardOpts& opts = {}) {
  const auto layout = layout_pair(params.vocab, sentence, context);
  Var h = encode_ids(tape, pv, params.config, layout.ids, opts);
  Var sel = tape.gather_rows(h, layout.query_word_first);
  return tape.add_rowvec(tape.matmul(sel, pv.emit_w), pv.emit_b);
}

namespace detail {

struct AnchorGroup {
  std::string key;  // normalized surface
  // (extra context index 1..m, word range) occurrences
  std::vector<retrieval::Anchor> occurrences;
};

inline std::vector<AnchorGroup> group_extra_anchors(const retrieval::ContextBundle& bundle) {
  std::vector<AnchorGroup> groups;
  std::map<std::string, std::size_t> by_key;
  for (const auto& a : bundle.anchors) {
    if (a.context_index == 0) continue;  // pre-infusion pools extra contexts only
    const std::string key = text::normalize_surface(a.surface);
    auto it = by_key.find(key);
    if (it == by_key.end()) {
      by_key.emplace(key, groups.size());
      groups.push_back(AnchorGroup{key, {a}});
    } else {
      groups[it->second].occurrences.push_back(a);
    }
  }
  return groups;
}

}  // namespace detail

/// Anchor vectors pooled from extra-context passes are appended to the
/// embedded [query ; SEP ; primary] rows before encoding. Falls back to
/// the concat pass when no anchors reference extra contexts.
inline Var forward_pre_infusion_t(Tape& tape, const ParamVars& pv, const ModelParams& params,
                                  const retrieval::ContextBundle& bundle,
                                  const ForwardOpts& opts = {}) {
  const auto groups = detail::group_extra_anchors(bundle);
  if (groups.empty())
    return forward_concat_t(tape, pv, params, bundle.query, bundle.primary_context, opts);

  // one encoder pass per extra context that holds at least one anchor
  std::map<std::size_t, Var> pass_h;
  std::map<std::size_t, PairLayout> pass_layout;
  for (const auto& g : groups)
    for (const auto& a : g.occurrences)
      if (!pass_h.count(a.context_index)) {
        const auto& ctx = bundle.extra_contexts.at(a.context_index - 1);
        PairLayout layout = layout_pair(params.vocab, bundle.query, ctx);
        Var h = encode_ids(tape, pv, params.config, layout.ids, opts);
        pass_layout.emplace(a.context_index, std::move(layout));
        pass_h.emplace(a.context_index, h);
      }

  // mean-pool each distinct surface's occurrence token vectors across passes
  std::vector<Var> anchor_rows;
  for (const auto& g : groups) {
    std::vector<Var> occurrence_rows;
    for (const auto& a : g.occurrences) {
      const auto& layout = pass_layout.at(a.context_index);
      std::vector<int> rows;
      for (std::size_t w = a.start; w < a.end; ++w)
        for (int p : layout.ctx_word_pieces.at(w)) rows.push_back(p);
      occurrence_rows.push_back(tape.gather_rows(pass_h.at(a.context_index), rows));
    }
    Var stacked = occurrence_rows.size() == 1 ? occurrence_rows[0]
                                              : tape.concat_rows(occurrence_rows);
    anchor_rows.push_back(tape.mean_rows(stacked));
  }
  Var anchor_vectors = anchor_rows.size() == 1 ? anchor_rows[0] : tape.concat_rows(anchor_rows);

  // main pass: id-mode embedding of [query ; SEP ; primary], vector-mode
  // anchor rows appended
  const auto layout = layout_pair(params.vocab, bundle.query, bundle.primary_context);
  detail::check_length(static_cast<Eigen::Index>(layout.ids.size()) + anchor_vectors.rows(),
                       params.config);
  Var id_rows = tape.gather_rows(pv.tok_emb, layout.ids);
  Var input_rows = tape.concat_rows({id_rows, anchor_vectors});
  Var h = encode_rows(tape, pv, params.config, input_rows, opts);
  Var sel = tape.gather_rows(h, layout.query_word_first);
  return tape.add_rowvec(tape.matmul(sel, pv.emit_w), pv.emit_b);
}

/// Query representations from the primary pass and every extra-context
/// pass merge by elementwise max before the emission map.
inline Var forward_post_infusion_t(Tape& tape, const ParamVars& pv, const ModelParams& params,
                                   const retrieval::ContextBundle& bundle,
                                   const ForwardOpts& opts = {}) {
  if (bundle.extra_contexts.empty())
    return forward_concat_t(tape, pv, params, bundle.query, bundle.primary_context, opts);

  auto query_pass = [&](const std::vector<std::string>& ctx) {
    const auto layout = layout_pair(params.vocab, bundle.query, ctx);
    Var h = encode_ids(tape, pv, params.config, layout.ids, opts);
    return tape.gather_rows(h, layout.query_word_first);
  };
  std::vector<Var> passes{query_pass(bundle.primary_context)};
  for (const auto& ctx : bundle.extra_contexts) passes.push_back(query_pass(ctx));
  Var h_max = tape.cwise_max(passes);
  return tape.add_rowvec(tape.matmul(h_max, pv.emit_w), pv.emit_b);
}

inline Var forward_mode_t(Tape& tape, const ParamVars& pv, const ModelParams& params, Mode mode,
                          const Sentence& sentence, const retrieval::ContextBundle* bundle,
                          const ForwardOpts& opts = {}) {
  switch (mode) {
    case Mode::kBaseline:
      return forward_baseline_t(tape, pv, params, sentence, opts);
    case Mode::kConcat: {
      static const retrieval::ContextBundle kEmpty{};
      const auto& b = bundle ? *bundle : kEmpty;
      return forward_concat_t(tape, pv, params, sentence, b.primary_context, opts);
    }
    case Mode::kPre: {
      if (!bundle) throw std::invalid_argument("pre-infusion needs a context bundle");
      return forward_pre_infusion_t(tape, pv, params, *bundle, opts);
    }
    case Mode::kPost: {
      if (!bundle) throw std::invalid_argument("post-infusion needs a context bundle");
      return forward_post_infusion_t(tape, pv, params, *bundle, opts);
    }
  }
  throw std::logic_error("unreachable");
}

// ---- plain (inference) wrappers ----

inline Mat forward_baseline(const ModelParams& params, const Sentence& sentence,
                            bool with_separator = false) {
  Tape tape;
  ParamVars pv = bind_params(tape, params, false);
  return forward_baseline_t(tape, pv, params, sentence, {}, with_separator).value();
}

inline Mat forward_concat(const ModelParams& params, const Sentence& sentence,
                         const std::vector<std::string>& context) {
  Tape tape;
  ParamVars pv = bind_params(tape, params, false);
  return forward_concat_t(tape, pv, params, sentence, context).value();
}

inline Mat forward_pre_infusion(const ModelParams& params, const retrieval::ContextBundle& bundle) {
  Tape tape;
  ParamVars pv = bind_params(tape, params, false);
  return forward_pre_infusion_t(tape, pv, params, bundle).value();
}

inline Mat forward_post_infusion(const ModelParams& params, const retrieval::ContextBundle& bundle) {
  Tape tape;
  ParamVars pv = bind_params(tape, params, false);
  return forward_post_infusion_t(tape, pv, params, bundle).value();
}

inline Mat forward_mode(const ModelParams& params, Mode mode, const Sentence& sentence,
                        const retrieval::ContextBundle* bundle) {
  Tape tape;
  ParamVars pv = bind_params(tape, params, false);
  return forward_mode_t(tape, pv, params, mode, sentence, bundle).value();
}

/// Viterbi decode of one sentence under the given mode.
inline TagSequence predict_tags(const ModelParams& params, Mode mode, const Sentence& sentence,
                                const retrieval::ContextBundle* bundle) {
  const Mat emissions = forward_mode(params, mode, sentence, bundle);
  const auto path = crf::viterbi(emissions, params.trans);
  TagSequence tags;
  tags.reserve(path.size());
  for (int idx : path) tags.push_back(tag_from_index(idx));
  return tags;
}

inline std::vector<EntitySpan> predict_spans(const ModelParams& params, Mode mode,
                                             const Sentence& sentence,
                                             const retrieval::ContextBundle* bundle) {
  return bio_decode(predict_tags(params, mode, sentence, bundle));
}

}  // namespace ragtag::model
