#pragma once

// The three retrieval strategies and context-bundle assembly feeding the
// tagger: document retrieval (text2text), candidate-entity retrieval
// (text2ent, sparse iterative or dense), typed-entity lookup (ent2ent)
// and the greedy slicing of the joined context stream.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragtag/bm25.hpp"
#include "ragtag/core.hpp"
#include "ragtag/corpus.hpp"
#include "ragtag/embed.hpp"
#include "ragtag/kb.hpp"
#include "ragtag/text.hpp"

namespace ragtag::retrieval {

using json = nlohmann::json;

enum class Source : std::uint8_t { kText2Text = 0, kText2Ent = 1, kEnt2Ent = 2 };

inline const char* to_string(Source s) {
  switch (s) {
    case Source::kText2Text: return "text2text";
    case Source::kText2Ent: return "text2ent";
    case Source::kEnt2Ent: return "ent2ent";
  }
  return "?";
}

inline Source source_from_string(const std::string& s) {
  if (s == "text2text") return Source::kText2Text;
  if (s == "text2ent") return Source::kText2Ent;
  if (s == "ent2ent") return Source::kEnt2Ent;
  throw std::invalid_argument("unknown source tag: " + s);
}

struct Anchor {
  std::size_t context_index = 0;  // 0 = primary slice, j = extra slice j
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive, token range within the slice
  std::string surface;  // the literal tokens at [start, end), space joined
};

struct Segment {
  Source source = Source::kText2Text;
  std::size_t begin = 0;  // token range over the pre-slice stream
  std::size_t end = 0;
};

struct EntResult {
  std::string surface;
  std::vector<std::string> types;
  std::string description;
};

constexpr std::uint32_t kBundleVersion = 1;

/// Query sentence plus sliced retrieval contexts and anchor positions.
struct ContextBundle {
  Sentence query;
  std::vector<std::string> primary_context;                // x~0
  std::vector<std::vector<std::string>> extra_contexts;    // x~1..x~m
  std::vector<Anchor> anchors;
  std::vector<Source> provenance;  // one tag per slice, primary first
  std::size_t slice_limit = 384;
  // analytics extras: per-source token ranges over the pre-slice stream
  // and the text2ent candidate surfaces
  std::vector<Segment> segments;
  std::vector<std::string> candidates;

  std::size_t num_slices() const { return 1 + extra_contexts.size(); }

  const std::vector<std::string>& slice(std::size_t i) const {
    return i == 0 ? primary_context : extra_contexts.at(i - 1);
  }

  /// Concatenation of all slices; equals the pre-slice stream.
  std::vector<std::string> flatten() const {
    std::vector<std::string> out = primary_context;
    for (const auto& c : extra_contexts) out.insert(out.end(), c.begin(), c.end());
    return out;
  }

  /// Joined text of all tokens a source contributed, one string per segment.
  std::vector<std::string> segment_texts(Source source) const {
    const auto flat = flatten();
    std::vector<std::string> out;
    for (const auto& seg : segments) {
      if (seg.source != source) continue;
      std::string s;
      for (std::size_t i = seg.begin; i < seg.end && i < flat.size(); ++i) {
        if (!s.empty()) s += ' ';
        s += flat[i];
      }
      out.push_back(std::move(s));
    }
    return out;
  }
};

/// Folds tokens one-to-one for normalized matching.
inline std::vector<std::string> fold_tokens(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(text::normalize_surface(t));
  return out;
}

/// Surface -> match tokens (normalized segmentation used on both sides).
inline std::vector<std::string> match_tokens(std::string_view surface) {
  return text::index_terms(surface);
}

namespace detail {

// Occurrences of `needle` (non-empty) as a contiguous subsequence of
// `haystack`; both already folded.
inline std::vector<std::size_t> find_occurrences(const std::vector<std::string>& haystack,
                                                 const std::vector<std::string>& needle) {
  std::vector<std::size_t> hits;
  if (needle.empty() || haystack.size() < needle.size()) return hits;
  for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
    bool ok = true;
    for (std::size_t j = 0; j < needle.size(); ++j)
      if (haystack[i + j] != needle[j]) {
        ok = false;
        break;
      }
    if (ok) hits.push_back(i);
  }
  return hits;
}

}  // namespace detail

/// Top-k document texts in rank order.
inline std::vector<std::string> text2text(const bm25::DocIndex& index, const Sentence& sentence,
                                          std::size_t k, const bm25::Bm25Params& params = {}) {
  if (k < 1) throw std::invalid_argument("text2text: k must be >= 1");
  std::string query;
  for (const auto& t : sentence.tokens) {
    if (!query.empty()) query += ' ';
    query += t;
  }
  std::vector<std::string> out;
  for (const auto& hit : bm25::search_topk(index.index, query, k, params))
    out.push_back(index.doc(hit.doc_id).text);
  return out;
}

/// Iterative sparse candidate-entity retrieval with query masking: each
/// round retrieves top-k entities, entities whose label or alias occurs
/// (normalized) in the current query have those terms removed, and the
/// loop stops after max_iters rounds or the first round that removes
/// nothing. Candidate labels are returned in first-found order.
inline std::vector<std::string> text2ent_sparse(const bm25::EntityIndex& index,
                                                const Sentence& sentence, std::size_t k,
                                                std::size_t max_iters,
                                                const bm25::Bm25Params& params = {}) {
  if (k < 1) throw std::invalid_argument("text2ent_sparse: k must be >= 1");
  std::vector<std::string> candidates;
  std::set<std::string> seen;  // normalized labels
  std::string joined;
  for (const auto& t : sentence.tokens) {
    if (!joined.empty()) joined += ' ';
    joined += t;
  }
  std::vector<std::string> query_terms = text::index_terms(joined);

  for (std::size_t round = 0; round < max_iters && !query_terms.empty(); ++round) {
    std::string query;
    for (const auto& t : query_terms) {
      if (!query.empty()) query += ' ';
      query += t;
    }
    const auto hits = bm25::search_topk(index.index, query, k, params);
    if (hits.empty()) break;
    bool removed_any = false;
    for (const auto& hit : hits) {
      const auto& entry = index.entries.at(static_cast<std::size_t>(hit.doc_id));
      if (seen.insert(text::normalize_surface(entry.label)).second)
        candidates.push_back(entry.label);
      std::vector<std::string> surfaces{entry.label};
      surfaces.insert(surfaces.end(), entry.aliases.begin(), entry.aliases.end());
      for (const auto& surf : surfaces) {
        const auto needle = match_tokens(surf);
        if (needle.empty()) continue;
        auto occ = detail::find_occurrences(query_terms, needle);
        while (!occ.empty()) {
          query_terms.erase(query_terms.begin() + static_cast<std::ptrdiff_t>(occ.front()),
                            query_terms.begin() + static_cast<std::ptrdiff_t>(occ.front() + needle.size()));
          removed_any = true;
          occ = detail::find_occurrences(query_terms, needle);
        }
      }
    }
    if (!removed_any) break;
  }
  return candidates;
}

/// Dense candidate-entity retrieval over precomputed entity vectors.
template <typename Embedder>
inline std::vector<std::string> dense_retrieve(const Embedder& embedder,
                                               const embed::DenseIndex& index,
                                               const Sentence& sentence, std::size_t k) {
  std::string joined;
  for (const auto& t : sentence.tokens) {
    if (!joined.empty()) joined += ' ';
    joined += t;
  }
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& hit : index.topk(embedder.embed(joined), k)) {
    const auto& label = index.entries[hit.entry].label;
    if (seen.insert(text::normalize_surface(label)).second) out.push_back(label);
  }
  return out;
}

/// Typed-entity lookup for each candidate surface; unmatched candidates are
/// dropped, duplicates collapse to the first occurrence. When a surface
/// matches several qids the type lists merge first-seen in qid order and
/// the first non-empty description wins.
inline std::vector<EntResult> ent2ent(const kb::EntityCatalog& catalog,
                                      const std::vector<std::string>& candidates,
                                      const std::string& language) {
  std::vector<EntResult> out;
  std::set<std::string> seen;
  for (const auto& cand : candidates) {
    if (!seen.insert(text::normalize_surface(cand)).second) continue;
    const auto matches = catalog.types_with_fallback(cand, language);
    if (matches.empty()) continue;
    EntResult r;
    r.surface = cand;
    for (const auto& m : matches) {
      for (const auto& t : m.types)
        if (std::find(r.types.begin(), r.types.end(), t) == r.types.end()) r.types.push_back(t);
      if (r.description.empty()) r.description = m.description;
    }
    out.push_back(std::move(r));
  }
  return out;
}

/// Splice text for one typed candidate: "surface (type1, type2)", bare
/// surface when untyped.
inline std::string splice_text(const EntResult& r) {
  if (r.types.empty()) return r.surface;
  std::string s = r.surface + " (";
  for (std::size_t i = 0; i < r.types.size(); ++i) {
    if (i) s += ", ";
    s += r.types[i];
  }
  s += ")";
  return s;
}

/// Joins text contexts and the entity splice into one token stream, cuts it
/// greedily into slices of slice_limit tokens, and records every occurrence
/// of a candidate surface in any slice as an anchor.
inline ContextBundle assemble_bundle(const Sentence& sentence,
                                     const std::vector<std::string>& text_contexts,
                                     const std::vector<EntResult>& ent_results,
                                     std::size_t slice_limit, bool entity_first = false,
                                     const std::vector<std::string>& bare_candidates = {}) {
  if (slice_limit < 8) throw std::invalid_argument("assemble_bundle: slice_limit must be >= 8");

  ContextBundle bundle;
  bundle.query = sentence;
  bundle.slice_limit = slice_limit;
  bundle.candidates = bare_candidates;

  std::vector<std::string> stream;
  std::vector<Source> stream_src;
  auto push_segment = [&](Source src, const std::string& piece) {
    const auto toks = text::word_tokens(piece);
    if (toks.empty()) return;
    Segment seg{src, stream.size(), stream.size() + toks.size()};
    for (const auto& t : toks) {
      stream.push_back(t);
      stream_src.push_back(src);
    }
    bundle.segments.push_back(seg);
  };
  auto push_text = [&] {
    for (const auto& c : text_contexts) push_segment(Source::kText2Text, c);
  };
  auto push_entities = [&] {
    for (const auto& c : bare_candidates) push_segment(Source::kText2Ent, c);
    for (const auto& r : ent_results) push_segment(Source::kEnt2Ent, splice_text(r));
  };
  if (entity_first) {
    push_entities();
    push_text();
  } else {
    push_text();
    push_entities();
  }

  // greedy cut: x~0 takes the first slice_limit tokens, then x~1..x~m
  for (std::size_t off = 0; off < stream.size(); off += slice_limit) {
    const std::size_t len = std::min(slice_limit, stream.size() - off);
    std::vector<std::string> slice(stream.begin() + static_cast<std::ptrdiff_t>(off),
                                   stream.begin() + static_cast<std::ptrdiff_t>(off + len));
    std::array<std::size_t, 3> votes{0, 0, 0};
    for (std::size_t i = off; i < off + len; ++i)
      ++votes[static_cast<std::size_t>(stream_src[i])];
    Source tag = Source::kText2Text;
    std::size_t best = votes[0];
    for (std::size_t s = 1; s < 3; ++s)
      if (votes[s] > best) {
        best = votes[s];
        tag = static_cast<Source>(s);
      }
    if (bundle.provenance.empty())
      bundle.primary_context = std::move(slice);
    else
      bundle.extra_contexts.push_back(std::move(slice));
    bundle.provenance.push_back(tag);
  }
  if (bundle.provenance.empty()) bundle.provenance.push_back(Source::kText2Text);

  // candidate surfaces whose occurrences become anchors
  std::vector<std::vector<std::string>> needles;
  std::set<std::vector<std::string>> needle_seen;
  auto add_needle = [&](const std::string& surf) {
    auto toks = match_tokens(surf);
    if (!toks.empty() && needle_seen.insert(toks).second) needles.push_back(std::move(toks));
  };
  for (const auto& r : ent_results) add_needle(r.surface);
  for (const auto& c : bare_candidates) add_needle(c);

  for (std::size_t s = 0; s < bundle.num_slices(); ++s) {
    const auto& slice = bundle.slice(s);
    std::vector<std::string> folded;
    folded.reserve(slice.size());
    for (const auto& t : slice) folded.push_back(text::normalize_surface(t));
    for (const auto& needle : needles) {
      for (std::size_t pos : detail::find_occurrences(folded, needle)) {
        Anchor a;
        a.context_index = s;
        a.start = pos;
        a.end = pos + needle.size();
        for (std::size_t i = pos; i < a.end; ++i) {
          if (!a.surface.empty()) a.surface += ' ';
          a.surface += slice[i];
        }
        bundle.anchors.push_back(std::move(a));
      }
    }
  }
  std::sort(bundle.anchors.begin(), bundle.anchors.end(), [](const Anchor& a, const Anchor& b) {
    if (a.context_index != b.context_index) return a.context_index < b.context_index;
    if (a.start != b.start) return a.start < b.start;
    if (a.end != b.end) return a.end < b.end;
    return a.surface < b.surface;
  });
  return bundle;
}

/// Cuts the bundle's context stream down to its first `length` tokens and
/// re-slices; anchors are re-detected from the original anchor surfaces.
inline ContextBundle truncate_bundle(const ContextBundle& bundle, std::size_t length) {
  ContextBundle out;
  out.query = bundle.query;
  out.slice_limit = bundle.slice_limit;
  out.candidates = bundle.candidates;

  auto flat = bundle.flatten();
  if (flat.size() > length) flat.resize(length);
  for (const auto& seg : bundle.segments) {
    if (seg.begin >= flat.size()) continue;
    out.segments.push_back(Segment{seg.source, seg.begin, std::min(seg.end, flat.size())});
  }
  for (std::size_t off = 0; off < flat.size(); off += bundle.slice_limit) {
    const std::size_t len = std::min(bundle.slice_limit, flat.size() - off);
    std::vector<std::string> slice(flat.begin() + static_cast<std::ptrdiff_t>(off),
                                   flat.begin() + static_cast<std::ptrdiff_t>(off + len));
    if (out.provenance.empty())
      out.primary_context = std::move(slice);
    else
      out.extra_contexts.push_back(std::move(slice));
    out.provenance.push_back(bundle.provenance.empty() ? Source::kText2Text
                                                       : bundle.provenance.front());
  }
  if (out.provenance.empty()) out.provenance.push_back(Source::kText2Text);

  std::vector<std::vector<std::string>> needles;
  std::set<std::vector<std::string>> seen;
  for (const auto& a : bundle.anchors) {
    auto toks = match_tokens(a.surface);
    if (!toks.empty() && seen.insert(toks).second) needles.push_back(std::move(toks));
  }
  for (std::size_t s = 0; s < out.num_slices(); ++s) {
    const auto& slice = out.slice(s);
    std::vector<std::string> folded;
    folded.reserve(slice.size());
    for (const auto& t : slice) folded.push_back(text::normalize_surface(t));
    for (const auto& needle : needles)
      for (std::size_t pos : detail::find_occurrences(folded, needle)) {
        Anchor a;
        a.context_index = s;
        a.start = pos;
        a.end = pos + needle.size();
        for (std::size_t i = pos; i < a.end; ++i) {
          if (!a.surface.empty()) a.surface += ' ';
          a.surface += slice[i];
        }
        out.anchors.push_back(std::move(a));
      }
  }
  std::sort(out.anchors.begin(), out.anchors.end(), [](const Anchor& a, const Anchor& b) {
    if (a.context_index != b.context_index) return a.context_index < b.context_index;
    if (a.start != b.start) return a.start < b.start;
    if (a.end != b.end) return a.end < b.end;
    return a.surface < b.surface;
  });
  return out;
}

namespace detail {

inline bool span_covered(const ContextBundle& bundle, const std::vector<std::string>& span_tokens) {
  std::string surface;
  for (const auto& t : span_tokens) {
    if (!surface.empty()) surface += ' ';
    surface += t;
  }
  const auto needle = match_tokens(surface);
  if (needle.empty()) return false;
  for (std::size_t s = 0; s < bundle.num_slices(); ++s) {
    const auto& slice = bundle.slice(s);
    std::vector<std::string> folded;
    folded.reserve(slice.size());
    for (const auto& t : slice) folded.push_back(text::normalize_surface(t));
    // flatten the folded slice tokens through the term splitter so both
    // sides segment identically
    std::vector<std::string> terms;
    for (const auto& f : folded) {
      auto parts = text::index_terms(f);
      terms.insert(terms.end(), parts.begin(), parts.end());
    }
    if (!find_occurrences(terms, needle).empty()) return true;
  }
  return false;
}

}  // namespace detail

/// Fraction of gold spans whose normalized surface occurs contiguously in
/// any context slice. No gold spans at all counts as full coverage.
inline double entity_coverage(const std::vector<ContextBundle>& bundles, const Corpus& gold) {
  if (bundles.size() != gold.size())
    throw std::invalid_argument("entity_coverage: bundles and corpus are misaligned (" +
                                std::to_string(bundles.size()) + " vs " +
                                std::to_string(gold.size()) + ")");
  std::size_t total = 0, covered = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto spans = bio_decode(gold[i].second);
    for (const auto& sp : spans) {
      ++total;
      std::vector<std::string> toks(gold[i].first.tokens.begin() + static_cast<std::ptrdiff_t>(sp.start),
                                    gold[i].first.tokens.begin() + static_cast<std::ptrdiff_t>(sp.end));
      if (detail::span_covered(bundles[i], toks)) ++covered;
    }
  }
  if (total == 0) return 1.0;
  return static_cast<double>(covered) / static_cast<double>(total);
}

/// Sentence indices split by whether ALL gold spans are covered by the
/// sentence's retrieval context (span-free sentences land in-context).
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_in_out(
    const std::vector<ContextBundle>& bundles, const Corpus& gold) {
  if (bundles.size() != gold.size())
    throw std::invalid_argument("split_in_out: bundles and corpus are misaligned");
  std::vector<std::size_t> in_set, out_set;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    bool all = true;
    for (const auto& sp : bio_decode(gold[i].second)) {
      std::vector<std::string> toks(gold[i].first.tokens.begin() + static_cast<std::ptrdiff_t>(sp.start),
                                    gold[i].first.tokens.begin() + static_cast<std::ptrdiff_t>(sp.end));
      if (!detail::span_covered(bundles[i], toks)) {
        all = false;
        break;
      }
    }
    (all ? in_set : out_set).push_back(i);
  }
  return {in_set, out_set};
}

// ---- bundle cache (newline-delimited JSON, schema versioned) ----

inline json bundle_to_json(const ContextBundle& b) {
  json j;
  j["v"] = kBundleVersion;
  j["language"] = b.query.language;
  j["query"] = b.query.tokens;
  j["limit"] = b.slice_limit;
  j["primary"] = b.primary_context;
  j["extras"] = b.extra_contexts;
  json anchors = json::array();
  for (const auto& a : b.anchors)
    anchors.push_back(json{{"c", a.context_index}, {"s", a.start}, {"e", a.end}, {"t", a.surface}});
  j["anchors"] = anchors;
  json prov = json::array();
  for (auto s : b.provenance) prov.push_back(to_string(s));
  j["prov"] = prov;
  json segs = json::array();
  for (const auto& s : b.segments)
    segs.push_back(json{{"src", to_string(s.source)}, {"b", s.begin}, {"e", s.end}});
  j["segments"] = segs;
  j["candidates"] = b.candidates;
  return j;
}

inline ContextBundle bundle_from_json(const json& j) {
  if (j.value("v", 0) != static_cast<int>(kBundleVersion))
    throw std::runtime_error("bundle schema version mismatch");
  ContextBundle b;
  b.query = Sentence(j.at("query").get<std::vector<std::string>>(), j.value("language", ""));
  b.slice_limit = j.value("limit", std::size_t{384});
  b.primary_context = j.at("primary").get<std::vector<std::string>>();
  b.extra_contexts = j.at("extras").get<std::vector<std::vector<std::string>>>();
  for (const auto& a : j.at("anchors"))
    b.anchors.push_back(Anchor{a.at("c").get<std::size_t>(), a.at("s").get<std::size_t>(),
                               a.at("e").get<std::size_t>(), a.at("t").get<std::string>()});
  for (const auto& p : j.at("prov")) b.provenance.push_back(source_from_string(p.get<std::string>()));
  for (const auto& s : j.at("segments"))
    b.segments.push_back(Segment{source_from_string(s.at("src").get<std::string>()),
                                 s.at("b").get<std::size_t>(), s.at("e").get<std::size_t>()});
  b.candidates = j.value("candidates", std::vector<std::string>{});
  return b;
}

inline void write_bundles(const std::string& path, const std::vector<ContextBundle>& bundles) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write bundle cache: " + path);
  for (const auto& b : bundles) out << bundle_to_json(b).dump() << '\n';
}

inline std::vector<ContextBundle> read_bundles(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open bundle cache: " + path);
  std::vector<ContextBundle> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(bundle_from_json(json::parse(line)));
  }
  return out;
}

}  // namespace ragtag::retrieval
