#pragma once

// Pluggable dense retrieval: an embedder contract plus the deterministic
// default (hashed character-trigram bag, L2-normalized) and a flat
// cosine-similarity index over entity records.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "ragtag/kb.hpp"
#include "ragtag/serial.hpp"
#include "ragtag/text.hpp"

namespace ragtag::embed {

inline std::uint64_t fnv1a64(const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 14695981039346656037ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

/// Hashed character-trigram bag over the normalized surface, L2-normalized.
/// Strings with no codepoints embed to the zero vector.
class TrigramEmbedder {
 public:
  explicit TrigramEmbedder(std::size_t dim = 256) : dim_(dim) {
    if (dim_ == 0) throw std::invalid_argument("embedder dimension must be positive");
  }

  std::size_t dim() const { return dim_; }

  std::vector<double> embed(std::string_view s) const {
    std::vector<double> v(dim_, 0.0);
    std::u32string cps = text::decode_utf8(text::normalize_surface(s));
    if (cps.empty()) return v;
    // sentinel-padded so 1- and 2-character strings still produce grams
    std::u32string padded;
    padded.reserve(cps.size() + 2);
    padded.push_back(U'\x01');
    padded += cps;
    padded.push_back(U'\x02');
    for (std::size_t i = 0; i + 2 < padded.size(); ++i) {
      std::uint32_t gram[3] = {static_cast<std::uint32_t>(padded[i]),
                               static_cast<std::uint32_t>(padded[i + 1]),
                               static_cast<std::uint32_t>(padded[i + 2])};
      v[fnv1a64(gram, sizeof gram) % dim_] += 1.0;
    }
    const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    if (norm > 0.0)
      for (auto& x : v) x /= norm;
    return v;
  }

 private:
  std::size_t dim_;
};

struct DenseEntry {
  std::string qid;
  std::string label;
  std::vector<double> vec;
};

struct DenseHit {
  std::size_t entry = 0;
  double score = 0.0;
};

constexpr std::uint32_t kDenseVersion = 1;

/// Flat vector index over entity labels.
class DenseIndex {
 public:
  std::size_t dim = 0;
  std::vector<DenseEntry> entries;

  template <typename Embedder>
  static DenseIndex build(const std::vector<kb::KbEntity>& ents, const Embedder& embedder) {
    DenseIndex di;
    di.dim = embedder.dim();
    for (const auto& e : ents)
      di.entries.push_back(DenseEntry{e.qid, e.label, embedder.embed(e.label)});
    return di;
  }

  /// Cosine top-k (vectors are unit length, so dot product). Ties break by
  /// ascending entry slot. k beyond the entry count returns everything.
  std::vector<DenseHit> topk(const std::vector<double>& query, std::size_t k) const {
    if (k < 1) throw std::invalid_argument("dense topk: k must be >= 1");
    if (query.size() != dim)
      throw std::invalid_argument("query dimension " + std::to_string(query.size()) +
                                  " does not match index dimension " + std::to_string(dim));
    std::vector<DenseHit> hits;
    hits.reserve(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < dim; ++j) dot += query[j] * entries[i].vec[j];
      hits.push_back(DenseHit{i, dot});
    }
    std::sort(hits.begin(), hits.end(), [](const DenseHit& a, const DenseHit& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.entry < b.entry;
    });
    if (hits.size() > k) hits.resize(k);
    return hits;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write dense index: " + path);
    out << "RGDNS1";
    serial::put_u32(out, kDenseVersion);
    serial::put_u64(out, dim);
    serial::put_u64(out, entries.size());
    for (const auto& e : entries) {
      serial::put_str(out, e.qid);
      serial::put_str(out, e.label);
      serial::put_f64s(out, e.vec.data(), e.vec.size());
    }
  }

  static DenseIndex load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dense index: " + path);
    serial::check_magic(in, "RGDNS1", path);
    if (serial::get_u32(in) != kDenseVersion)
      throw std::runtime_error("dense index version mismatch: " + path);
    DenseIndex di;
    di.dim = serial::get_u64(in);
    const std::uint64_t n = serial::get_u64(in);
    di.entries.resize(n);
    for (auto& e : di.entries) {
      e.qid = serial::get_str(in);
      e.label = serial::get_str(in);
      e.vec.resize(di.dim);
      serial::get_f64s(in, e.vec.data(), di.dim);
    }
    return di;
  }
};

}  // namespace ragtag::embed
