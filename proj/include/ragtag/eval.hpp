#pragma once

// The metric and analysis battery: entity-level micro/macro F1 (exact
// span+label match), coarse-grained projection, mention-detection F1,
// typing accuracy over boundary-matched spans, character-multiset IoU
// with histograms, the context-length sweep and the in/out-of-context
// split report.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragtag/core.hpp"
#include "ragtag/corpus.hpp"
#include "ragtag/model.hpp"
#include "ragtag/retrieval.hpp"
#include "ragtag/text.hpp"

namespace ragtag::eval {

using json = nlohmann::json;

struct PrfCounts {
  std::size_t tp = 0, fp = 0, fn = 0;
  PrfCounts& operator+=(const PrfCounts& o) {
    tp += o.tp, fp += o.fp, fn += o.fn;
    return *this;
  }
};

struct Prf {
  double p = 0, r = 0, f1 = 0;
  bool p_defined = false, r_defined = false;
};

/// Undefined precision/recall is reported as 0 with the flag cleared.
inline Prf prf_from(const PrfCounts& c) {
  Prf out;
  out.p_defined = c.tp + c.fp > 0;
  out.r_defined = c.tp + c.fn > 0;
  out.p = out.p_defined ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  out.r = out.r_defined ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  out.f1 = (out.p + out.r) > 0 ? 2 * out.p * out.r / (out.p + out.r) : 0.0;
  return out;
}

struct LabelScores {
  std::map<std::string, PrfCounts> per_label;  // labels present in gold or pred
  PrfCounts micro;
  double macro_f1 = 0.0;

  Prf micro_prf() const { return prf_from(micro); }
};

struct EvalReport {
  LabelScores fine;
  LabelScores coarse;
  PrfCounts mention;
  double mention_f1 = 0.0;
  double typing_accuracy = 0.0;
  bool typing_defined = false;
  std::size_t typing_total = 0, typing_correct = 0;
  std::size_t sentences = 0, gold_spans = 0, pred_spans = 0;

  double micro_f1() const { return fine.micro_prf().f1; }
  double macro_f1() const { return fine.macro_f1; }
};

namespace detail {

inline void check_aligned(const Corpus& gold, const Corpus& pred) {
  if (gold.size() != pred.size())
    throw std::invalid_argument("evaluate: corpora have different sentence counts (" +
                                std::to_string(gold.size()) + " vs " +
                                std::to_string(pred.size()) + ")");
  for (std::size_t i = 0; i < gold.size(); ++i)
    if (!(gold[i].first == pred[i].first))
      throw std::invalid_argument("evaluate: sentence " + std::to_string(i) +
                                  " differs between gold and prediction");
}

struct Keyed {
  std::size_t start, end;
  std::string label;
  bool operator<(const Keyed& o) const {
    return std::tie(start, end, label) < std::tie(o.start, o.end, o.label);
  }
};

template <typename LabelOf>
LabelScores score_spans(const std::vector<std::vector<EntitySpan>>& gold,
                        const std::vector<std::vector<EntitySpan>>& pred, LabelOf label_of) {
  LabelScores out;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    std::set<Keyed> gset, pset;
    for (const auto& s : gold[i]) gset.insert(Keyed{s.start, s.end, label_of(s.label)});
    for (const auto& s : pred[i]) pset.insert(Keyed{s.start, s.end, label_of(s.label)});
    for (const auto& k : gset) {
      if (pset.count(k)) {
        ++out.per_label[k.label].tp;
        ++out.micro.tp;
      } else {
        ++out.per_label[k.label].fn;
        ++out.micro.fn;
      }
    }
    for (const auto& k : pset)
      if (!gset.count(k)) {
        ++out.per_label[k.label].fp;
        ++out.micro.fp;
      }
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [label, counts] : out.per_label) {
    if (counts.tp + counts.fp + counts.fn == 0) continue;
    sum += prf_from(counts).f1;
    ++n;
  }
  out.macro_f1 = n ? sum / static_cast<double>(n) : 0.0;
  return out;
}

}  // namespace detail

/// Full report: fine + coarse-projected scores, mention F1, typing
/// accuracy (over gold spans whose boundaries appear in the prediction).
inline EvalReport evaluate(const Corpus& gold, const Corpus& pred) {
  detail::check_aligned(gold, pred);
  const auto& tax = Taxonomy::instance();

  EvalReport report;
  report.sentences = gold.size();
  const auto gspans = corpus_spans(gold);
  const auto pspans = corpus_spans(pred);
  for (const auto& v : gspans) report.gold_spans += v.size();
  for (const auto& v : pspans) report.pred_spans += v.size();

  report.fine = detail::score_spans(gspans, pspans,
                                    [&](FineId f) { return tax.fine_name(f); });
  report.coarse = detail::score_spans(
      gspans, pspans, [&](FineId f) { return tax.coarse_name(tax.coarse_of(f)); });

  for (std::size_t i = 0; i < gspans.size(); ++i) {
    std::map<std::pair<std::size_t, std::size_t>, FineId> pred_by_bounds;
    for (const auto& s : pspans[i]) pred_by_bounds[{s.start, s.end}] = s.label;
    std::set<std::pair<std::size_t, std::size_t>> gold_bounds;
    for (const auto& s : gspans[i]) {
      gold_bounds.insert({s.start, s.end});
      auto it = pred_by_bounds.find({s.start, s.end});
      if (it != pred_by_bounds.end()) {
        ++report.typing_total;
        if (it->second == s.label) ++report.typing_correct;
      }
    }
    for (const auto& s : gspans[i]) {
      if (pred_by_bounds.count({s.start, s.end}))
        ++report.mention.tp;
      else
        ++report.mention.fn;
    }
    for (const auto& s : pspans[i])
      if (!gold_bounds.count({s.start, s.end})) ++report.mention.fp;
  }
  report.mention_f1 = prf_from(report.mention).f1;
  report.typing_defined = report.typing_total > 0;
  report.typing_accuracy = report.typing_defined ? static_cast<double>(report.typing_correct) /
                                                       static_cast<double>(report.typing_total)
                                                 : 0.0;
  return report;
}

inline EvalReport entity_f1(const Corpus& gold, const Corpus& pred) {
  return evaluate(gold, pred);
}

inline double mention_f1(const Corpus& gold, const Corpus& pred) {
  return evaluate(gold, pred).mention_f1;
}

inline double typing_accuracy(const Corpus& gold, const Corpus& pred) {
  return evaluate(gold, pred).typing_accuracy;
}

/// Projection is per span: both sides map fine -> coarse, no merging.
inline LabelScores coarse_report(const Corpus& gold, const Corpus& pred) {
  return evaluate(gold, pred).coarse;
}

// ---- character IoU (multiset over codepoints) ----

inline double char_iou(std::string_view query, std::string_view result, bool strip_ws = false) {
  auto bag = [&](std::string_view s) {
    std::map<char32_t, std::size_t> counts;
    for (char32_t cp : text::decode_utf8(s)) {
      if (strip_ws && text::is_space_cp(cp)) continue;
      ++counts[cp];
    }
    return counts;
  };
  const auto a = bag(query), b = bag(result);
  std::size_t inter = 0, uni = 0;
  for (const auto& [cp, n] : a) {
    auto it = b.find(cp);
    const std::size_t m = it == b.end() ? 0 : it->second;
    inter += std::min(n, m);
    uni += std::max(n, m);
  }
  for (const auto& [cp, n] : b)
    if (!a.count(cp)) uni += n;
  if (uni == 0) return 1.0;  // two empty strings are identical
  return static_cast<double>(inter) / static_cast<double>(uni);
}

/// Right-open bins over [0, 1]; the last bin is closed.
inline std::vector<std::size_t> iou_histogram(
    const std::vector<std::pair<std::string, std::string>>& pairs, std::size_t bins,
    bool strip_ws = false) {
  if (bins < 1) throw std::invalid_argument("iou_histogram: bins must be >= 1");
  std::vector<std::size_t> counts(bins, 0);
  for (const auto& [q, r] : pairs) {
    const double v = char_iou(q, r, strip_ws);
    std::size_t bin = static_cast<std::size_t>(v * static_cast<double>(bins));
    if (bin >= bins) bin = bins - 1;  // v == 1.0 lands in the closed last bin
    ++counts[bin];
  }
  return counts;
}

inline double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return 0.5 * (values[mid - 1] + values[mid]);
}

// ---- context-length sweep ----

struct SweepRow {
  std::size_t length = 0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
};

/// Length 0 is the RAW point: the same checkpoint run in baseline mode.
/// Other lengths truncate the context stream before prediction.
inline std::vector<SweepRow> context_length_sweep(
    const model::ModelParams& params, model::Mode mode, const Corpus& gold,
    const std::vector<retrieval::ContextBundle>& bundles, const std::vector<std::size_t>& lengths) {
  if (bundles.size() != gold.size())
    throw std::invalid_argument("sweep: bundles misaligned with corpus");
  std::vector<SweepRow> rows;
  for (std::size_t len : lengths) {
    Corpus pred;
    pred.reserve(gold.size());
    for (std::size_t i = 0; i < gold.size(); ++i) {
      const auto& sent = gold[i].first;
      TagSequence tags;
      if (len == 0) {
        tags = model::predict_tags(params, model::Mode::kBaseline, sent, nullptr);
      } else {
        const auto cut = retrieval::truncate_bundle(bundles[i], len);
        tags = model::predict_tags(params, mode, sent, &cut);
      }
      pred.emplace_back(sent, std::move(tags));
    }
    const auto report = evaluate(gold, pred);
    rows.push_back(SweepRow{len, report.micro_f1(), report.macro_f1()});
  }
  return rows;
}

// ---- in/out-of-context report ----

struct InOutReport {
  EvalReport in_context;
  EvalReport out_of_context;
  double in_ratio = 0.0;
  double out_ratio = 0.0;
  std::size_t in_sentences = 0, out_sentences = 0;
};

inline InOutReport in_out_report(const Corpus& gold, const Corpus& pred,
                                 const std::vector<retrieval::ContextBundle>& bundles) {
  detail::check_aligned(gold, pred);
  const auto [in_idx, out_idx] = retrieval::split_in_out(bundles, gold);
  auto subset = [&](const Corpus& c, const std::vector<std::size_t>& idx) {
    Corpus out;
    for (std::size_t i : idx) out.push_back(c[i]);
    return out;
  };
  InOutReport rep;
  rep.in_sentences = in_idx.size();
  rep.out_sentences = out_idx.size();
  rep.in_context = evaluate(subset(gold, in_idx), subset(pred, in_idx));
  rep.out_of_context = evaluate(subset(gold, out_idx), subset(pred, out_idx));
  const double total = static_cast<double>(gold.size());
  rep.in_ratio = total > 0 ? rep.in_sentences / total : 0.0;
  rep.out_ratio = total > 0 ? rep.out_sentences / total : 0.0;
  return rep;
}

// ---- emitters ----

inline json prf_json(const Prf& x) {
  return json{{"p", x.p}, {"r", x.r}, {"f1", x.f1},
              {"p_defined", x.p_defined}, {"r_defined", x.r_defined}};
}

inline json scores_json(const LabelScores& s) {
  json per = json::object();
  for (const auto& [label, counts] : s.per_label) {
    json e = prf_json(prf_from(counts));
    e["tp"] = counts.tp;
    e["fp"] = counts.fp;
    e["fn"] = counts.fn;
    per[label] = e;
  }
  return json{{"per_label", per}, {"micro", prf_json(s.micro_prf())}, {"macro_f1", s.macro_f1}};
}

inline json report_json(const EvalReport& r) {
  json j;
  j["fine"] = scores_json(r.fine);
  j["coarse"] = scores_json(r.coarse);
  j["mention_f1"] = r.mention_f1;
  j["typing_accuracy"] = r.typing_accuracy;
  j["typing_defined"] = r.typing_defined;
  j["counts"] = json{{"sentences", r.sentences},
                     {"gold_spans", r.gold_spans},
                     {"pred_spans", r.pred_spans},
                     {"typing_total", r.typing_total},
                     {"typing_correct", r.typing_correct}};
  return j;
}

inline std::string report_table(const EvalReport& r) {
  std::string out;
  char line[160];
  auto add = [&](const char* label, const Prf& x, const PrfCounts& c) {
    std::snprintf(line, sizeof line, "%-24s P %7.4f  R %7.4f  F1 %7.4f  (tp %zu fp %zu fn %zu)\n",
                  label, x.p, x.r, x.f1, c.tp, c.fp, c.fn);
    out += line;
  };
  out += "== entity-level (fine) ==\n";
  for (const auto& [label, counts] : r.fine.per_label) add(label.c_str(), prf_from(counts), counts);
  add("micro", r.fine.micro_prf(), r.fine.micro);
  std::snprintf(line, sizeof line, "%-24s F1 %7.4f\n", "macro", r.fine.macro_f1);
  out += line;
  out += "== coarse-projected ==\n";
  for (const auto& [label, counts] : r.coarse.per_label)
    add(label.c_str(), prf_from(counts), counts);
  add("micro", r.coarse.micro_prf(), r.coarse.micro);
  std::snprintf(line, sizeof line, "%-24s F1 %7.4f\n", "macro", r.coarse.macro_f1);
  out += line;
  std::snprintf(line, sizeof line, "mention F1 %.4f | typing accuracy %.4f (%zu/%zu)\n",
                r.mention_f1, r.typing_accuracy, r.typing_correct, r.typing_total);
  out += line;
  return out;
}

}  // namespace ragtag::eval
