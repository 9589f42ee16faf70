#pragma once

// Label taxonomy (6 coarse / 33 fine), tokenized sentences, BIO tag codec
// and typed token spans. Everything here is immutable after construction
// and safe to read from any number of threads.

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ragtag {

using FineId = std::uint16_t;
using CoarseId = std::uint8_t;

/// The fixed fine-grained tag set and its coarse parents, in canonical
/// listing order. Access through Taxonomy::instance().
class Taxonomy {
 public:
  static constexpr std::size_t kCoarseCount = 6;
  static constexpr std::size_t kFineCount = 33;

  static const Taxonomy& instance() {
    static const Taxonomy tax;
    return tax;
  }

  const std::array<std::string, kCoarseCount>& coarse_labels() const { return coarse_; }
  const std::array<std::string, kFineCount>& fine_labels() const { return fine_; }

  const std::string& fine_name(FineId id) const { return fine_.at(id); }
  const std::string& coarse_name(CoarseId id) const { return coarse_.at(id); }

  std::optional<FineId> find_fine(std::string_view name) const {
    auto it = fine_by_name_.find(std::string(name));
    if (it == fine_by_name_.end()) return std::nullopt;
    return it->second;
  }

  FineId fine_id(std::string_view name) const {
    auto id = find_fine(name);
    if (!id) throw std::invalid_argument("unknown fine label: " + std::string(name));
    return *id;
  }

  /// Coarse parent of a fine label.
  CoarseId coarse_of(FineId fine) const {
    if (fine >= kFineCount) throw std::invalid_argument("fine label id out of range");
    return fine_to_coarse_[fine];
  }

 private:
  Taxonomy() {
    const char* kCoarse[kCoarseCount] = {"LOC", "CW", "GRP", "PER", "PROD", "MED"};
    struct Row { const char* name; CoarseId coarse; };
    const Row kFine[kFineCount] = {
        {"Facility", 0}, {"OtherLOC", 0}, {"HumanSettlement", 0}, {"Station", 0},
        {"VisualWork", 1}, {"MusicalWork", 1}, {"WrittenWork", 1}, {"ArtWork", 1},
        {"Software", 1},
        {"MusicalGRP", 2}, {"PublicCORP", 2}, {"PrivateCORP", 2},
        {"AerospaceManufacturer", 2}, {"SportsGRP", 2}, {"CarManufacturer", 2},
        {"ORG", 2},
        {"Scientist", 3}, {"Artist", 3}, {"Athlete", 3}, {"Politician", 3},
        {"Cleric", 3}, {"SportsManager", 3}, {"OtherPER", 3},
        {"Clothing", 4}, {"Vehicle", 4}, {"Food", 4}, {"Drink", 4}, {"OtherPROD", 4},
        {"Medication/Vaccine", 5}, {"MedicalProcedure", 5}, {"AnatomicalStructure", 5},
        {"Symptom", 5}, {"Disease", 5},
    };
    for (std::size_t i = 0; i < kCoarseCount; ++i) coarse_[i] = kCoarse[i];
    for (std::size_t i = 0; i < kFineCount; ++i) {
      fine_[i] = kFine[i].name;
      fine_to_coarse_[i] = kFine[i].coarse;
      fine_by_name_.emplace(fine_[i], static_cast<FineId>(i));
    }
  }

  std::array<std::string, kCoarseCount> coarse_;
  std::array<std::string, kFineCount> fine_;
  std::array<CoarseId, kFineCount> fine_to_coarse_;
  std::unordered_map<std::string, FineId> fine_by_name_;
};

/// project_coarse: fine label -> its unique coarse parent.
inline std::string project_coarse(std::string_view fine_label) {
  const auto& tax = Taxonomy::instance();
  return tax.coarse_name(tax.coarse_of(tax.fine_id(fine_label)));
}

struct Sentence {
  std::vector<std::string> tokens;
  std::string language;

  Sentence() = default;
  Sentence(std::vector<std::string> toks, std::string lang = "")
      : tokens(std::move(toks)), language(std::move(lang)) {
    if (tokens.empty()) throw std::invalid_argument("Sentence: empty token list");
    for (const auto& t : tokens)
      if (t.empty()) throw std::invalid_argument("Sentence: empty token");
  }

  std::size_t size() const { return tokens.size(); }
  bool operator==(const Sentence& o) const { return tokens == o.tokens; }
};

/// Token span [start, end) with a fine label.
struct EntitySpan {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
  FineId label = 0;

  std::size_t length() const { return end - start; }
  bool overlaps(const EntitySpan& o) const { return start < o.end && o.start < end; }
  bool operator==(const EntitySpan& o) const {
    return start == o.start && end == o.end && label == o.label;
  }
  bool operator<(const EntitySpan& o) const {
    if (start != o.start) return start < o.start;
    if (end != o.end) return end < o.end;
    return label < o.label;
  }
};

inline EntitySpan make_span(std::size_t start, std::size_t end, std::string_view label) {
  return EntitySpan{start, end, Taxonomy::instance().fine_id(label)};
}

/// BIO strings, one per sentence token.
using TagSequence = std::vector<std::string>;

/// Encodes non-overlapping spans as BIO tags over `len` tokens.
inline TagSequence bio_encode(std::vector<EntitySpan> spans, std::size_t len) {
  std::sort(spans.begin(), spans.end());
  const auto& tax = Taxonomy::instance();
  for (const auto& s : spans) {
    if (!(s.start < s.end) || s.end > len)
      throw std::invalid_argument("bio_encode: span out of range");
    if (s.label >= Taxonomy::kFineCount)
      throw std::invalid_argument("bio_encode: bad label id");
  }
  for (std::size_t i = 1; i < spans.size(); ++i) {
    if (spans[i - 1].overlaps(spans[i]))
      throw std::invalid_argument(
          "bio_encode: overlapping spans [" + std::to_string(spans[i - 1].start) + "," +
          std::to_string(spans[i - 1].end) + ") and [" + std::to_string(spans[i].start) +
          "," + std::to_string(spans[i].end) + ")");
  }
  TagSequence tags(len, "O");
  for (const auto& s : spans) {
    tags[s.start] = "B-" + tax.fine_name(s.label);
    for (std::size_t i = s.start + 1; i < s.end; ++i)
      tags[i] = "I-" + tax.fine_name(s.label);
  }
  return tags;
}

/// Parses one BIO tag string into (kind, fine id). kind: 'O', 'B', 'I'.
inline std::pair<char, FineId> parse_tag(std::string_view tag) {
  if (tag == "O") return {'O', 0};
  if (tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-') {
    const auto& tax = Taxonomy::instance();
    auto id = tax.find_fine(tag.substr(2));
    if (id) return {tag[0], *id};
  }
  throw std::invalid_argument("unknown tag: " + std::string(tag));
}

/// Decodes BIO tags to spans. A stray I-X (no preceding B-X/I-X of the
/// same label) is repaired to B-X. Output sorted by start.
inline std::vector<EntitySpan> bio_decode(const TagSequence& tags) {
  std::vector<EntitySpan> spans;
  bool open = false;
  EntitySpan cur;
  auto close = [&](std::size_t end) {
    if (open) {
      cur.end = end;
      spans.push_back(cur);
      open = false;
    }
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    auto [kind, id] = parse_tag(tags[i]);
    if (kind == 'O') {
      close(i);
    } else if (kind == 'B') {
      close(i);
      cur = EntitySpan{i, i, id};
      open = true;
    } else {  // I-
      if (open && cur.label == id) continue;
      close(i);  // stray I- opens a new span (B- repair)
      cur = EntitySpan{i, i, id};
      open = true;
    }
  }
  close(tags.size());
  return spans;
}

}  // namespace ragtag
