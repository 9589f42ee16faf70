#include <catch2/catch.hpp>

#include <random>

#include "ragtag/eval.hpp"

using namespace ragtag;

namespace {

Corpus one_sentence(std::size_t len, const std::vector<EntitySpan>& spans) {
  std::vector<std::string> toks;
  for (std::size_t i = 0; i < len; ++i) toks.push_back("w" + std::to_string(i));
  return Corpus{{Sentence(toks, "en"), bio_encode(spans, len)}};
}

Corpus with_spans(const Corpus& base, const std::vector<EntitySpan>& spans) {
  Corpus out = base;
  out[0].second = bio_encode(spans, base[0].first.size());
  return out;
}

}  // namespace

TEST_CASE("perfect prediction scores one everywhere") {
  const auto gold = one_sentence(6, {make_span(0, 2, "Artist"), make_span(3, 4, "Disease")});
  const auto r = eval::evaluate(gold, gold);
  CHECK(r.micro_f1() == 1.0);
  CHECK(r.macro_f1() == 1.0);
  CHECK(r.mention_f1 == 1.0);
  CHECK(r.typing_accuracy == 1.0);
  CHECK(r.coarse.micro_prf().f1 == 1.0);
}

TEST_CASE("hand-counted micro and macro") {
  // gold {(0,1,A),(2,3,B)}, pred {(0,1,A),(2,3,A)}:
  // micro P=R=F1=0.5; F1(A)=2/3, F1(B)=0 -> macro 1/3
  const auto gold = one_sentence(4, {make_span(0, 1, "Artist"), make_span(2, 3, "Disease")});
  const auto pred = with_spans(gold, {make_span(0, 1, "Artist"), make_span(2, 3, "Artist")});
  const auto r = eval::evaluate(gold, pred);
  CHECK(r.fine.micro_prf().p == Approx(0.5));
  CHECK(r.fine.micro_prf().r == Approx(0.5));
  CHECK(r.micro_f1() == Approx(0.5));
  CHECK(eval::prf_from(r.fine.per_label.at("Artist")).f1 == Approx(2.0 / 3.0));
  CHECK(eval::prf_from(r.fine.per_label.at("Disease")).f1 == 0.0);
  CHECK(r.macro_f1() == Approx(1.0 / 3.0).margin(1e-12));
}

TEST_CASE("empty prediction reports zero with undefined precision flagged") {
  const auto gold = one_sentence(4, {make_span(0, 1, "Artist")});
  const auto pred = with_spans(gold, {});
  const auto r = eval::evaluate(gold, pred);
  const auto micro = r.fine.micro_prf();
  CHECK_FALSE(micro.p_defined);
  CHECK(micro.p == 0.0);
  CHECK(micro.r == 0.0);
  CHECK(micro.f1 == 0.0);
}

TEST_CASE("misaligned corpora are rejected with the sentence index") {
  const auto gold = one_sentence(4, {});
  Corpus pred{{Sentence({"other", "tokens", "here", "now"}, "en"), TagSequence(4, "O")}};
  CHECK_THROWS_WITH(eval::evaluate(gold, pred), Catch::Contains("sentence 0"));
  Corpus two = gold;
  two.push_back(gold[0]);
  CHECK_THROWS_WITH(eval::evaluate(gold, two), Catch::Contains("sentence counts"));
}

TEST_CASE("mention f1 and typing accuracy hand counts") {
  SECTION("boundaries right, labels wrong") {
    const auto gold = one_sentence(5, {make_span(0, 2, "Artist"), make_span(3, 4, "Disease")});
    const auto pred = with_spans(gold, {make_span(0, 2, "Symptom"), make_span(3, 4, "Facility")});
    const auto r = eval::evaluate(gold, pred);
    CHECK(r.mention_f1 == 1.0);
    CHECK(r.typing_accuracy == 0.0);
    CHECK(r.micro_f1() == 0.0);
  }

  SECTION("3 gold spans, 2 boundary-matched, 1 correctly labeled") {
    const auto gold = one_sentence(
        8, {make_span(0, 1, "Artist"), make_span(2, 3, "Disease"), make_span(4, 6, "Facility")});
    const auto pred = with_spans(gold, {make_span(0, 1, "Artist"), make_span(2, 3, "Symptom")});
    const auto r = eval::evaluate(gold, pred);
    // mention: P = 2/2, R = 2/3 -> F1 = 0.8
    CHECK(r.mention_f1 == Approx(0.8).margin(1e-9));
    CHECK(r.typing_accuracy == Approx(0.5).margin(1e-12));
    CHECK(r.typing_total == 2);
    CHECK(r.typing_correct == 1);
  }
}

TEST_CASE("coarse projection per span") {
  SECTION("fine-correct prediction is coarse-correct") {
    const auto gold = one_sentence(3, {make_span(0, 2, "Artist")});
    const auto r = eval::evaluate(gold, gold);
    CHECK(r.coarse.micro_prf().f1 == 1.0);
  }

  SECTION("Artist for Scientist is a coarse TP under PER") {
    const auto gold = one_sentence(3, {make_span(0, 2, "Scientist")});
    const auto pred = with_spans(gold, {make_span(0, 2, "Artist")});
    const auto r = eval::evaluate(gold, pred);
    CHECK(r.micro_f1() == 0.0);
    CHECK(r.coarse.micro_prf().f1 == 1.0);
    CHECK(r.coarse.per_label.count("PER") == 1);
  }

  SECTION("Facility for Artist is wrong at both granularities") {
    const auto gold = one_sentence(3, {make_span(0, 2, "Artist")});
    const auto pred = with_spans(gold, {make_span(0, 2, "Facility")});
    const auto r = eval::evaluate(gold, pred);
    CHECK(r.micro_f1() == 0.0);
    CHECK(r.coarse.micro_prf().f1 == 0.0);
  }
}

TEST_CASE("coarse micro F1 never drops below fine micro F1") {
  std::mt19937_64 rng(37);
  const auto& tax = Taxonomy::instance();
  for (int iter = 0; iter < 150; ++iter) {
    std::uniform_int_distribution<std::size_t> len_d(1, 10);
    std::uniform_int_distribution<int> label_d(0, 32), coin(0, 1);
    const std::size_t len = len_d(rng);
    auto random_spans = [&]() {
      std::vector<EntitySpan> spans;
      std::size_t pos = 0;
      while (pos < len) {
        std::uniform_int_distribution<std::size_t> gap(0, 2);
        pos += gap(rng);
        if (pos >= len) break;
        std::uniform_int_distribution<std::size_t> width(1, std::min<std::size_t>(2, len - pos));
        const std::size_t w = width(rng);
        spans.push_back(EntitySpan{pos, pos + w, static_cast<FineId>(label_d(rng))});
        pos += w + 1;
      }
      return spans;
    };
    const auto gold = one_sentence(len, random_spans());
    const auto pred = with_spans(gold, random_spans());
    const auto r = eval::evaluate(gold, pred);
    CHECK(r.coarse.micro_prf().f1 >= r.micro_f1() - 1e-12);
    (void)tax;
  }
}

TEST_CASE("macro is invariant under label renaming") {
  // swapping which fine labels appear must not change the macro value
  const auto gold_a = one_sentence(6, {make_span(0, 1, "Artist"), make_span(2, 3, "Disease")});
  const auto pred_a = with_spans(gold_a, {make_span(0, 1, "Artist")});
  const auto gold_b = one_sentence(6, {make_span(0, 1, "Vehicle"), make_span(2, 3, "Station")});
  const auto pred_b = with_spans(gold_b, {make_span(0, 1, "Vehicle")});
  CHECK(eval::evaluate(gold_a, pred_a).macro_f1() ==
        Approx(eval::evaluate(gold_b, pred_b).macro_f1()));
}

TEST_CASE("char IoU") {
  CHECK(eval::char_iou("abc", "abc") == 1.0);
  CHECK(eval::char_iou("abc", "xyz") == 0.0);
  CHECK(eval::char_iou("aab", "ab") == Approx(2.0 / 3.0).margin(1e-9));
  // repeat characters count separately
  CHECK(eval::char_iou("aa", "a") == Approx(0.5));
  // symmetry
  CHECK(eval::char_iou("kelda", "station") == eval::char_iou("station", "kelda"));
  // whitespace included by default, stripped on demand
  CHECK(eval::char_iou("a b", "ab") == Approx(2.0 / 3.0));
  CHECK(eval::char_iou("a b", "ab", /*strip_ws=*/true) == 1.0);
  // multilingual codepoints
  CHECK(eval::char_iou("北京", "北海") == Approx(1.0 / 3.0));
}

TEST_CASE("iou histogram binning") {
  std::vector<std::pair<std::string, std::string>> pairs{
      {"abc", "abc"},  // 1.0 -> last bin (closed)
      {"abc", "xyz"},  // 0.0 -> first bin
      {"aab", "ab"},   // 2/3
  };
  const auto h = eval::iou_histogram(pairs, 4);
  REQUIRE(h.size() == 4);
  CHECK(h[0] == 1);
  CHECK(h[2] == 1);  // 2/3 in [0.5, 0.75)
  CHECK(h[3] == 1);
  CHECK_THROWS_AS(eval::iou_histogram(pairs, 0), std::invalid_argument);
}

TEST_CASE("in/out report strata recombine to the total") {
  const Sentence s1({"deal", "hudson", "spoke"}, "en");
  const Sentence s2({"kelda", "station", "fell"}, "en");
  const Sentence s3({"granite", "rock", "sat"}, "en");
  Corpus gold;
  gold.emplace_back(s1, bio_encode({make_span(0, 2, "OtherPER")}, 3));
  gold.emplace_back(s2, bio_encode({make_span(0, 2, "Facility")}, 3));
  gold.emplace_back(s3, bio_encode({make_span(0, 2, "OtherLOC")}, 3));
  Corpus pred = gold;
  pred[1].second = bio_encode({make_span(0, 2, "Station")}, 3);  // one typing error

  std::vector<retrieval::ContextBundle> bundles{
      retrieval::assemble_bundle(s1, {"Deal Hudson biography"}, {}, 8),
      retrieval::assemble_bundle(s2, {"life aboard Kelda Station"}, {}, 8),
      retrieval::assemble_bundle(s3, {}, {}, 8),  // out of context
  };

  const auto rep = eval::in_out_report(gold, pred, bundles);
  CHECK(rep.in_sentences == 2);
  CHECK(rep.out_sentences == 1);
  CHECK(rep.in_ratio + rep.out_ratio == Approx(1.0).margin(1e-9));

  // micro counts of the strata sum to the total micro counts
  const auto total = eval::evaluate(gold, pred);
  CHECK(rep.in_context.fine.micro.tp + rep.out_of_context.fine.micro.tp == total.fine.micro.tp);
  CHECK(rep.in_context.fine.micro.fp + rep.out_of_context.fine.micro.fp == total.fine.micro.fp);
  CHECK(rep.in_context.fine.micro.fn + rep.out_of_context.fine.micro.fn == total.fine.micro.fn);

  SECTION("all in-context leaves an empty out stratum") {
    std::vector<retrieval::ContextBundle> full{
        retrieval::assemble_bundle(s1, {"Deal Hudson biography"}, {}, 8),
        retrieval::assemble_bundle(s2, {"about Kelda Station"}, {}, 8),
        retrieval::assemble_bundle(s3, {"granite rock geology"}, {}, 8),
    };
    const auto rep2 = eval::in_out_report(gold, pred, full);
    CHECK(rep2.in_ratio == Approx(1.0));
    CHECK(rep2.out_ratio == Approx(0.0));
    CHECK(rep2.out_of_context.sentences == 0);
  }
}

TEST_CASE("report emitters produce json and a table") {
  const auto gold = one_sentence(4, {make_span(0, 1, "Artist")});
  const auto pred = with_spans(gold, {make_span(0, 1, "Artist"), make_span(2, 3, "Disease")});
  const auto r = eval::evaluate(gold, pred);
  const auto j = eval::report_json(r);
  CHECK(j["fine"]["micro"]["f1"].get<double>() == Approx(2.0 / 3.0));
  CHECK(j["counts"]["gold_spans"] == 1);
  const auto table = eval::report_table(r);
  CHECK(table.find("Artist") != std::string::npos);
  CHECK(table.find("micro") != std::string::npos);
}

TEST_CASE("typing accuracy times boundary-matched count is an integer") {
  std::mt19937_64 rng(53);
  for (int iter = 0; iter < 50; ++iter) {
    std::uniform_int_distribution<int> label_d(0, 5);
    const std::size_t len = 8;
    auto spans = [&](int seed_shift) {
      std::vector<EntitySpan> out;
      for (std::size_t p = 0; p + 1 < len; p += 3)
        if ((label_d(rng) + seed_shift) % 2 == 0)
          out.push_back(EntitySpan{p, p + 2, static_cast<FineId>(label_d(rng))});
      return out;
    };
    const auto gold = one_sentence(len, spans(0));
    const auto pred = with_spans(gold, spans(1));
    const auto r = eval::evaluate(gold, pred);
    const double product = r.typing_accuracy * static_cast<double>(r.typing_total);
    CHECK(product == Approx(std::round(product)).margin(1e-9));
  }
}
