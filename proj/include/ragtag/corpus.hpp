#pragma once

// Column-format corpus I/O: UTF-8, tab separated, blank line between
// sentences, "# id" comment lines skipped. Accepts 2-column lines
// (token TAB tag) and 4-column lines (token, two placeholder columns, tag).

#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ragtag/core.hpp"

namespace ragtag {

using LabeledSentence = std::pair<Sentence, TagSequence>;
using Corpus = std::vector<LabeledSentence>;

namespace detail {
inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> cols;
  std::size_t pos = 0;
  while (true) {
    std::size_t tab = line.find('\t', pos);
    if (tab == std::string::npos) {
      cols.push_back(line.substr(pos));
      break;
    }
    cols.push_back(line.substr(pos, tab - pos));
    pos = tab + 1;
  }
  return cols;
}
}  // namespace detail

inline Corpus read_corpus_stream(std::istream& in, const std::string& language,
                                 const std::string& origin) {
  Corpus out;
  std::vector<std::string> tokens;
  TagSequence tags;
  std::string line;
  std::size_t lineno = 0;

  auto flush = [&] {
    if (tokens.empty()) return;
    out.emplace_back(Sentence(std::move(tokens), language), std::move(tags));
    tokens = {};
    tags = {};
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("# id", 0) == 0) continue;
    if (line.empty()) {
      flush();
      continue;
    }
    auto cols = detail::split_tabs(line);
    if (cols.size() == 1) {
      // Also accept space-separated 4-column lines (common in the wild).
      std::istringstream ss(line);
      std::string c;
      cols.clear();
      while (ss >> c) cols.push_back(c);
    }
    if (cols.size() != 2 && cols.size() != 4)
      throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                               ": expected 2 or 4 columns, got " +
                               std::to_string(cols.size()));
    const std::string& token = cols.front();
    const std::string& tag = cols.back();
    if (token.empty())
      throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": empty token");
    try {
      parse_tag(tag);  // validates label
    } catch (const std::exception& e) {
      throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
    tokens.push_back(token);
    tags.push_back(tag);
  }
  flush();
  return out;
}

inline Corpus read_corpus(const std::string& path, const std::string& language = "") {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  return read_corpus_stream(in, language, path);
}

/// Canonical 2-column form; round-trips through read_corpus.
inline void write_corpus_stream(std::ostream& out, const Corpus& corpus) {
  for (const auto& [sent, tags] : corpus) {
    for (std::size_t i = 0; i < sent.tokens.size(); ++i)
      out << sent.tokens[i] << '\t' << tags[i] << '\n';
    out << '\n';
  }
}

inline void write_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write corpus file: " + path);
  write_corpus_stream(out, corpus);
}

/// Gold/predicted spans of every sentence, via the BIO codec.
inline std::vector<std::vector<EntitySpan>> corpus_spans(const Corpus& corpus) {
  std::vector<std::vector<EntitySpan>> out;
  out.reserve(corpus.size());
  for (const auto& [sent, tags] : corpus) out.push_back(bio_decode(tags));
  return out;
}

}  // namespace ragtag
