#pragma once

// Majority-voting combination of span predictions from m models: spans
// ranked by votes, admitted on a strict > 50% threshold, overlaps resolved
// in rank order (more votes first, longer span first on equal votes).

#include <algorithm>
#include <map>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "ragtag/core.hpp"
#include "ragtag/corpus.hpp"

namespace ragtag::ensemble {

struct VoteTable {
  std::map<std::tuple<std::size_t, std::size_t, FineId>, std::size_t> counts;
  std::size_t total_models = 0;
};

inline VoteTable tally(const std::vector<std::vector<EntitySpan>>& predictions) {
  VoteTable table;
  table.total_models = predictions.size();
  for (const auto& spans : predictions)
    for (const auto& s : spans) ++table.counts[{s.start, s.end, s.label}];
  return table;
}

/// Majority vote over m span lists for one sentence.
inline std::vector<EntitySpan> vote(const std::vector<std::vector<EntitySpan>>& predictions) {
  if (predictions.empty()) throw std::invalid_argument("vote: need at least one model");
  const std::size_t m = predictions.size();
  const VoteTable table = tally(predictions);

  struct Candidate {
    EntitySpan span;
    std::size_t votes;
  };
  std::vector<Candidate> ranked;
  for (const auto& [key, votes] : table.counts) {
    if (votes * 2 <= m) continue;  // "more than 50%" is strict
    ranked.push_back(Candidate{EntitySpan{std::get<0>(key), std::get<1>(key), std::get<2>(key)},
                               votes});
  }
  std::sort(ranked.begin(), ranked.end(), [](const Candidate& a, const Candidate& b) {
    if (a.votes != b.votes) return a.votes > b.votes;
    if (a.span.length() != b.span.length()) return a.span.length() > b.span.length();
    if (a.span.start != b.span.start) return a.span.start < b.span.start;
    return a.span.label < b.span.label;
  });

  std::vector<EntitySpan> kept;
  for (const auto& c : ranked) {
    bool clash = false;
    for (const auto& k : kept)
      if (c.span.overlaps(k)) {
        clash = true;
        break;
      }
    if (!clash) kept.push_back(c.span);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

/// Corpus-level ensembling: all inputs must contain the same sentences.
inline Corpus vote_corpora(const std::vector<Corpus>& inputs) {
  if (inputs.empty()) throw std::invalid_argument("vote_corpora: no inputs");
  const std::size_t n = inputs[0].size();
  for (std::size_t k = 1; k < inputs.size(); ++k) {
    if (inputs[k].size() != n)
      throw std::invalid_argument("vote_corpora: prediction file " + std::to_string(k) +
                                  " has a different sentence count");
    for (std::size_t i = 0; i < n; ++i)
      if (!(inputs[k][i].first == inputs[0][i].first))
        throw std::invalid_argument("vote_corpora: sentence " + std::to_string(i) +
                                    " differs between prediction files");
  }
  Corpus out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::vector<EntitySpan>> per_model;
    per_model.reserve(inputs.size());
    for (const auto& corpus : inputs) per_model.push_back(bio_decode(corpus[i].second));
    const auto spans = vote(per_model);
    out.emplace_back(inputs[0][i].first, bio_encode(spans, inputs[0][i].first.size()));
  }
  return out;
}

}  // namespace ragtag::ensemble
