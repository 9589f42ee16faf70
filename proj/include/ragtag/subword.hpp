#pragma once

// Whitespace/punctuation-piece vocabulary with UTF-8 byte fallback:
// a word either maps to one piece id or decomposes into byte ids.
// Id layout: 0 = PAD, 1 = SEP, 2..257 = bytes, 258+ = pieces.

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace ragtag::subword {

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kSep = 1;
  static constexpr int kByteBase = 2;
  static constexpr int kPieceBase = 258;

  Vocab() = default;

  static Vocab from_pieces(std::vector<std::string> pieces) {
    Vocab v;
    v.pieces_ = std::move(pieces);
    for (std::size_t i = 0; i < v.pieces_.size(); ++i)
      v.piece_ids_.emplace(v.pieces_[i], kPieceBase + static_cast<int>(i));
    return v;
  }

  int size() const { return kPieceBase + static_cast<int>(pieces_.size()); }
  const std::vector<std::string>& pieces() const { return pieces_; }

  /// One piece id for a known word, byte ids otherwise.
  std::vector<int> encode_word(const std::string& w) const {
    auto it = piece_ids_.find(w);
    if (it != piece_ids_.end()) return {it->second};
    std::vector<int> out;
    out.reserve(w.size());
    for (unsigned char b : w) out.push_back(kByteBase + static_cast<int>(b));
    return out;
  }

  bool operator==(const Vocab& o) const { return pieces_ == o.pieces_; }

 private:
  std::vector<std::string> pieces_;
  std::unordered_map<std::string, int> piece_ids_;
};

/// Frequency-ranked builder; ties break by the piece string so a given
/// token multiset always produces the same vocabulary.
class VocabBuilder {
 public:
  void add(const std::string& token) { ++counts_[token]; }

  void add_all(const std::vector<std::string>& tokens) {
    for (const auto& t : tokens) add(t);
  }

  Vocab finish(std::size_t max_total_size = 8192) const {
    std::vector<std::pair<std::string, std::uint64_t>> ranked(counts_.begin(), counts_.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    const std::size_t cap =
        max_total_size > Vocab::kPieceBase ? max_total_size - Vocab::kPieceBase : 0;
    std::vector<std::string> pieces;
    for (const auto& [tok, cnt] : ranked) {
      if (pieces.size() >= cap) break;
      pieces.push_back(tok);
    }
    return Vocab::from_pieces(std::move(pieces));
  }

 private:
  std::map<std::string, std::uint64_t> counts_;
};

/// Word list -> piece ids plus the first-piece position of each word.
struct EncodedWords {
  std::vector<int> ids;
  std::vector<int> word_first;
  std::vector<std::vector<int>> word_pieces;  // positions per word
};

inline EncodedWords encode_words(const Vocab& vocab, const std::vector<std::string>& words) {
  EncodedWords out;
  for (const auto& w : words) {
    out.word_first.push_back(static_cast<int>(out.ids.size()));
    std::vector<int> positions;
    for (int id : vocab.encode_word(w)) {
      positions.push_back(static_cast<int>(out.ids.size()));
      out.ids.push_back(id);
    }
    out.word_pieces.push_back(std::move(positions));
  }
  return out;
}

}  // namespace ragtag::subword
