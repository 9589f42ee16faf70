#pragma once

// From-scratch BM25 inverted index over KB documents and entity records.
// Scoring: score(q,d) = sum over query term occurrences of
//   IDF(t) * tf*(k1+1) / (tf + k1*(1-b+b*len/avgdl)),
//   IDF(t) = ln(1 + (N-df+0.5)/(df+0.5))
// with k1=1.2, b=0.75 defaults (Lucene-style smoothed IDF).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "ragtag/kb.hpp"
#include "ragtag/serial.hpp"
#include "ragtag/text.hpp"

namespace ragtag::bm25 {

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

struct Posting {
  std::int64_t doc_id = 0;
  std::uint32_t tf = 0;
};

struct ScoredHit {
  std::int64_t doc_id = 0;
  double score = 0.0;
  int rank = 0;  // 1-based
};

/// Index terms: NFKC case fold, Unicode word split, Han ideographs always
/// emitted one character per term. `language` is accepted for interface
/// stability; segmentation is language independent.
inline std::vector<std::string> tokenize_for_index(std::string_view s,
                                                   const std::string& language = "") {
  (void)language;
  return text::index_terms(s);
}

class InvertedIndex {
 public:
  /// Appends one document's postings. Duplicate doc_id is rejected.
  void add_document(std::int64_t doc_id, const std::vector<std::string>& terms) {
    if (doc_len_.count(doc_id))
      throw std::invalid_argument("duplicate doc_id in index: " + std::to_string(doc_id));
    std::map<std::string, std::uint32_t> tf;  // ordered: postings stay deterministic
    for (const auto& t : terms) ++tf[t];
    for (const auto& [term, freq] : tf) {
      auto& plist = postings_[term];
      // keep postings sorted by doc_id even for out-of-order adds
      Posting p{doc_id, freq};
      auto it = std::lower_bound(plist.begin(), plist.end(), doc_id,
                                 [](const Posting& a, std::int64_t id) { return a.doc_id < id; });
      plist.insert(it, p);
    }
    doc_len_[doc_id] = static_cast<std::uint32_t>(terms.size());
    total_len_ += terms.size();
  }

  std::size_t n_docs() const { return doc_len_.size(); }
  double avg_doc_len() const {
    return doc_len_.empty() ? 0.0 : static_cast<double>(total_len_) / doc_len_.size();
  }
  std::size_t doc_freq(const std::string& term) const {
    auto it = postings_.find(term);
    return it == postings_.end() ? 0 : it->second.size();
  }
  const std::vector<Posting>* postings(const std::string& term) const {
    auto it = postings_.find(term);
    return it == postings_.end() ? nullptr : &it->second;
  }
  std::uint32_t doc_len(std::int64_t doc_id) const {
    auto it = doc_len_.find(doc_id);
    if (it == doc_len_.end())
      throw std::invalid_argument("unknown doc_id: " + std::to_string(doc_id));
    return it->second;
  }

  void save(std::ostream& out) const {
    serial::put_u64(out, doc_len_.size());
    for (const auto& [id, len] : std::map<std::int64_t, std::uint32_t>(doc_len_.begin(), doc_len_.end())) {
      serial::put_i64(out, id);
      serial::put_u32(out, len);
    }
    serial::put_u64(out, postings_.size());
    for (const auto& [term, plist] :
         std::map<std::string, std::vector<Posting>>(postings_.begin(), postings_.end())) {
      serial::put_str(out, term);
      serial::put_u64(out, plist.size());
      for (const auto& p : plist) {
        serial::put_i64(out, p.doc_id);
        serial::put_u32(out, p.tf);
      }
    }
  }

  static InvertedIndex load(std::istream& in) {
    InvertedIndex idx;
    const std::uint64_t nd = serial::get_u64(in);
    for (std::uint64_t i = 0; i < nd; ++i) {
      const std::int64_t id = serial::get_i64(in);
      const std::uint32_t len = serial::get_u32(in);
      idx.doc_len_[id] = len;
      idx.total_len_ += len;
    }
    const std::uint64_t nt = serial::get_u64(in);
    for (std::uint64_t i = 0; i < nt; ++i) {
      std::string term = serial::get_str(in);
      const std::uint64_t np = serial::get_u64(in);
      std::vector<Posting> plist(np);
      for (auto& p : plist) {
        p.doc_id = serial::get_i64(in);
        p.tf = serial::get_u32(in);
      }
      idx.postings_.emplace(std::move(term), std::move(plist));
    }
    return idx;
  }

 private:
  std::unordered_map<std::string, std::vector<Posting>> postings_;
  std::unordered_map<std::int64_t, std::uint32_t> doc_len_;
  std::uint64_t total_len_ = 0;
};

inline double idf(std::size_t n_docs, std::size_t df) {
  return std::log(1.0 + (static_cast<double>(n_docs) - df + 0.5) / (df + 0.5));
}

/// Top-k by (score desc, doc_id asc). Empty query tokenization or an
/// empty index yields an empty result.
inline std::vector<ScoredHit> search_topk(const InvertedIndex& index, std::string_view query,
                                          std::size_t k, const Bm25Params& params = {},
                                          const std::string& language = "") {
  if (k < 1) throw std::invalid_argument("search_topk: k must be >= 1");
  std::vector<ScoredHit> hits;
  if (index.n_docs() == 0) return hits;
  const auto terms = tokenize_for_index(query, language);
  if (terms.empty()) return hits;

  const double avgdl = index.avg_doc_len();
  std::unordered_map<std::int64_t, double> acc;
  for (const auto& term : terms) {  // one contribution per query occurrence
    const auto* plist = index.postings(term);
    if (!plist) continue;
    const double w = idf(index.n_docs(), plist->size());
    for (const auto& p : *plist) {
      const double len_norm = 1.0 - params.b + params.b * index.doc_len(p.doc_id) / avgdl;
      const double tf_term = p.tf * (params.k1 + 1.0) / (p.tf + params.k1 * len_norm);
      acc[p.doc_id] += w * tf_term;
    }
  }
  hits.reserve(acc.size());
  for (const auto& [doc, score] : acc) hits.push_back(ScoredHit{doc, score, 0});
  std::sort(hits.begin(), hits.end(), [](const ScoredHit& a, const ScoredHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
  });
  if (hits.size() > k) hits.resize(k);
  for (std::size_t i = 0; i < hits.size(); ++i) hits[i].rank = static_cast<int>(i + 1);
  return hits;
}

constexpr std::uint32_t kIndexVersion = 1;

struct StoredDoc {
  std::int64_t doc_id = 0;
  std::string title;
  std::string text;
};

/// Document index: BM25 postings plus the stored paragraph texts so that
/// retrieval can return them in rank order.
class DocIndex {
 public:
  InvertedIndex index;
  std::vector<StoredDoc> docs;

  static DocIndex build(const std::vector<kb::KbDocument>& documents,
                        const std::string& language = "") {
    DocIndex di;
    for (const auto& d : documents) {
      di.index.add_document(d.doc_id, tokenize_for_index(d.title + " " + d.text, language));
      di.docs.push_back(StoredDoc{d.doc_id, d.title, d.text});
    }
    std::sort(di.docs.begin(), di.docs.end(),
              [](const StoredDoc& a, const StoredDoc& b) { return a.doc_id < b.doc_id; });
    for (std::size_t i = 0; i < di.docs.size(); ++i) di.by_id_[di.docs[i].doc_id] = i;
    return di;
  }

  const StoredDoc& doc(std::int64_t doc_id) const {
    auto it = by_id_.find(doc_id);
    if (it == by_id_.end())
      throw std::invalid_argument("unknown doc_id: " + std::to_string(doc_id));
    return docs[it->second];
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write index: " + path);
    out << "RGIDX1";
    serial::put_u32(out, kIndexVersion);
    serial::put_u64(out, docs.size());
    for (const auto& d : docs) {
      serial::put_i64(out, d.doc_id);
      serial::put_str(out, d.title);
      serial::put_str(out, d.text);
    }
    index.save(out);
  }

  static DocIndex load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open index: " + path);
    serial::check_magic(in, "RGIDX1", path);
    if (serial::get_u32(in) != kIndexVersion)
      throw std::runtime_error("index version mismatch: " + path);
    DocIndex di;
    const std::uint64_t n = serial::get_u64(in);
    di.docs.resize(n);
    for (auto& d : di.docs) {
      d.doc_id = serial::get_i64(in);
      d.title = serial::get_str(in);
      d.text = serial::get_str(in);
    }
    for (std::size_t i = 0; i < di.docs.size(); ++i) di.by_id_[di.docs[i].doc_id] = i;
    di.index = InvertedIndex::load(in);
    return di;
  }

 private:
  std::unordered_map<std::int64_t, std::size_t> by_id_;
};

/// Entity index: postings over label + aliases + description, entries kept
/// for candidate surfaces and masking. Posting doc ids are entry slots.
class EntityIndex {
 public:
  struct Entry {
    std::string qid;
    std::string label;
    std::vector<std::string> aliases;
  };

  InvertedIndex index;
  std::vector<Entry> entries;

  static EntityIndex build(const std::vector<kb::KbEntity>& ents,
                           const std::string& language = "") {
    EntityIndex ei;
    for (const auto& e : ents) {
      std::string blob = e.label;
      for (const auto& a : e.aliases) blob += " " + a;
      if (!e.description.empty()) blob += " " + e.description;
      ei.index.add_document(static_cast<std::int64_t>(ei.entries.size()),
                            tokenize_for_index(blob, language));
      ei.entries.push_back(Entry{e.qid, e.label, e.aliases});
    }
    return ei;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write index: " + path);
    out << "RGEIX1";
    serial::put_u32(out, kIndexVersion);
    serial::put_u64(out, entries.size());
    for (const auto& e : entries) {
      serial::put_str(out, e.qid);
      serial::put_str(out, e.label);
      serial::put_u64(out, e.aliases.size());
      for (const auto& a : e.aliases) serial::put_str(out, a);
    }
    index.save(out);
  }

  static EntityIndex load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open index: " + path);
    serial::check_magic(in, "RGEIX1", path);
    if (serial::get_u32(in) != kIndexVersion)
      throw std::runtime_error("index version mismatch: " + path);
    EntityIndex ei;
    const std::uint64_t n = serial::get_u64(in);
    ei.entries.resize(n);
    for (auto& e : ei.entries) {
      e.qid = serial::get_str(in);
      e.label = serial::get_str(in);
      const std::uint64_t na = serial::get_u64(in);
      e.aliases.resize(na);
      for (auto& a : e.aliases) a = serial::get_str(in);
    }
    ei.index = InvertedIndex::load(in);
    return ei;
  }
};

}  // namespace ragtag::bm25
