#include <catch2/catch.hpp>

#include <filesystem>
#include <fstream>
#include <random>

#include "ragtag/retrieval.hpp"

using namespace ragtag;
using retrieval::ContextBundle;
using retrieval::EntResult;
using retrieval::Source;

namespace {

bm25::DocIndex table2_doc_index() {
  std::vector<kb::KbDocument> docs;
  docs.push_back({1, "Deal Hudson",
                  "In 1995 Hudson became publisher of the conservative Roman Catholic magazine, Crisis.",
                  "en"});
  docs.push_back({2, "Crisis Magazine", "Hudson is the former publisher and editor of", "en"});
  docs.push_back({3, "Ave Maria Radio",
                  "Hudson also hosts the radio show Church and Culture on Ave Maria Radio", "en"});
  docs.push_back({4, "Bees", "Bees are flying insects closely related to wasps and ants.", "en"});
  docs.push_back({5, "Granite", "Granite is a coarse-grained intrusive igneous rock.", "en"});
  return bm25::DocIndex::build(docs);
}

Sentence table2_query() {
  return Sentence({"from", "1995", "to", "2011", "deal", "hudson", "was", "the",
                   "magazine's", "publisher", "."},
                  "en");
}

bm25::EntityIndex masking_entity_index() {
  std::vector<kb::KbEntity> ents;
  ents.push_back({"Q10", "Zorblat Prime", {}, "zorblat prime megastructure", {}, "en"});
  ents.push_back({"Q11", "Kelda Station", {}, "kelda station outpost", {}, "en"});
  ents.push_back({"Q12", "Unrelated Thing", {}, "completely different words", {}, "en"});
  return bm25::EntityIndex::build(ents);
}

kb::EntityCatalog hudson_catalog() {
  kb::EntityCatalog catalog;
  const auto dir = std::filesystem::temp_directory_path() / "ragtag_ret_cat.jsonl";
  std::ofstream out(dir);
  out << R"({"qid": "Q1", "label": "Deal W. Hudson", "aliases": ["Deal Hudson"], "description": "Hudson is the former publisher and editor of Crisis Magazine and InsideCatholic.com.", "instance_of": ["human"]})"
      << "\n"
      << R"({"qid": "Q2", "label": "Kelda Station", "aliases": [], "description": "An outpost.", "instance_of": ["station"]})"
      << "\n";
  out.close();
  catalog.add(kb::build_entity_lookup(dir.string(), "en"));
  std::filesystem::remove(dir);
  return catalog;
}

std::vector<std::string> n_tokens(std::size_t n, const std::string& stem = "w") {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(stem + std::to_string(i));
  return out;
}

std::string join(const std::vector<std::string>& toks) {
  std::string s;
  for (const auto& t : toks) {
    if (!s.empty()) s += ' ';
    s += t;
  }
  return s;
}

}  // namespace

TEST_CASE("text2text returns ranked document texts") {
  const auto di = table2_doc_index();
  const auto texts = retrieval::text2text(di, table2_query(), 3);
  REQUIRE(!texts.empty());
  CHECK(texts[0].find("In 1995 Hudson became publisher") != std::string::npos);
}

TEST_CASE("text2text edge cases") {
  const auto di = table2_doc_index();
  CHECK_THROWS_AS(retrieval::text2text(di, table2_query(), 0), std::invalid_argument);
  CHECK(retrieval::text2text(di, Sentence({"qqq", "zzz"}, "en"), 3).empty());
  bm25::DocIndex empty;
  CHECK(retrieval::text2text(empty, table2_query(), 3).empty());
}

TEST_CASE("text2ent_sparse iterative masking") {
  const auto ei = masking_entity_index();
  // both entity names occur in the query; the first one dominates round 1
  const Sentence query({"zorblat", "prime", "zorblat", "prime", "visited", "kelda", "station"},
                       "en");

  SECTION("k=1 needs two rounds to surface both") {
    const auto two = retrieval::text2ent_sparse(ei, query, 1, 2);
    CHECK(two == std::vector<std::string>{"Zorblat Prime", "Kelda Station"});
    const auto one = retrieval::text2ent_sparse(ei, query, 1, 1);
    CHECK(one == std::vector<std::string>{"Zorblat Prime"});
  }

  SECTION("max_iters=0 never runs") {
    CHECK(retrieval::text2ent_sparse(ei, query, 1, 0).empty());
  }

  SECTION("no surface match means a single round without masking") {
    const Sentence off_topic({"megastructure", "outpost"}, "en");
    const auto got = retrieval::text2ent_sparse(ei, off_topic, 3, 5);
    // candidates are returned even though none matched the query surface
    CHECK(got.size() >= 1);
    for (std::size_t i = 1; i < got.size(); ++i) CHECK(got[i] != got[0]);
  }

  SECTION("output is duplicate free and bounded by the round budget") {
    for (std::size_t iters : {1u, 2u, 3u, 7u}) {
      const auto got = retrieval::text2ent_sparse(ei, query, 2, iters);
      std::set<std::string> uniq(got.begin(), got.end());
      CHECK(uniq.size() == got.size());
    }
  }
}

TEST_CASE("dense retrieval with the trigram embedder") {
  const embed::TrigramEmbedder emb(128);

  SECTION("identical strings embed to cosine 1") {
    const auto a = emb.embed("Deal W. Hudson");
    double dot = 0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * a[i];
    CHECK(dot == Approx(1.0).margin(1e-9));
  }

  std::vector<kb::KbEntity> ents;
  ents.push_back({"Q1", "Deal W. Hudson", {}, "", {}, "en"});
  ents.push_back({"Q2", "Granite Rock", {}, "", {}, "en"});
  const auto di = embed::DenseIndex::build(ents, emb);

  SECTION("related entity outranks an unrelated one") {
    const Sentence q({"the", "deal", "hudson", "profile"}, "en");
    const auto got = retrieval::dense_retrieve(emb, di, q, 2);
    REQUIRE(got.size() == 2);
    CHECK(got[0] == "Deal W. Hudson");
  }

  SECTION("k beyond the entity count returns everything ranked") {
    const Sentence q({"granite"}, "en");
    const auto got = retrieval::dense_retrieve(emb, di, q, 50);
    CHECK(got.size() == 2);
    CHECK(got[0] == "Granite Rock");
  }

  SECTION("dimension mismatch is rejected") {
    const embed::TrigramEmbedder other(64);
    CHECK_THROWS_WITH(di.topk(other.embed("x"), 1), Catch::Contains("dimension"));
  }
}

TEST_CASE("ent2ent lookup") {
  const auto catalog = hudson_catalog();

  const auto got = retrieval::ent2ent(catalog, {"deal hudson"}, "en");
  REQUIRE(got.size() == 1);
  CHECK(got[0].surface == "deal hudson");
  CHECK(got[0].types == std::vector<std::string>{"human"});
  CHECK(got[0].description.find("Hudson is the former publisher") == 0);

  CHECK(retrieval::ent2ent(catalog, {"qqq"}, "en").empty());

  const auto dedup = retrieval::ent2ent(catalog, {"deal hudson", "Deal  Hudson"}, "en");
  CHECK(dedup.size() == 1);

  const auto ordered = retrieval::ent2ent(catalog, {"kelda station", "deal hudson"}, "en");
  REQUIRE(ordered.size() == 2);
  CHECK(ordered[0].surface == "kelda station");  // order preserved
}

TEST_CASE("splice text format") {
  CHECK(retrieval::splice_text({"deal hudson", {"human"}, ""}) == "deal hudson (human)");
  CHECK(retrieval::splice_text({"x", {"a", "b"}, ""}) == "x (a, b)");
  CHECK(retrieval::splice_text({"bare", {}, ""}) == "bare");
}

TEST_CASE("assemble_bundle slicing arithmetic") {
  const Sentence sent({"a", "b"}, "en");

  SECTION("total under the limit leaves m = 0") {
    const auto b = retrieval::assemble_bundle(sent, {join(n_tokens(5))}, {}, 8);
    CHECK(b.extra_contexts.empty());
    CHECK(b.primary_context.size() == 5);
    CHECK(b.provenance.size() == 1);
  }

  SECTION("2.5x the limit cuts (L, L, L/2)") {
    const auto b = retrieval::assemble_bundle(sent, {join(n_tokens(20))}, {}, 8);
    REQUIRE(b.extra_contexts.size() == 2);
    CHECK(b.primary_context.size() == 8);
    CHECK(b.extra_contexts[0].size() == 8);
    CHECK(b.extra_contexts[1].size() == 4);
  }

  SECTION("no retrieval at all") {
    const auto b = retrieval::assemble_bundle(sent, {}, {}, 8);
    CHECK(b.primary_context.empty());
    CHECK(b.extra_contexts.empty());
    CHECK(b.anchors.empty());
  }

  SECTION("slice_limit below 8 is rejected") {
    CHECK_THROWS_AS(retrieval::assemble_bundle(sent, {}, {}, 7), std::invalid_argument);
  }
}

TEST_CASE("assemble_bundle stream reconstruction and provenance") {
  const Sentence sent({"q"}, "en");
  const std::vector<std::string> texts{join(n_tokens(10, "t")), join(n_tokens(3, "u"))};
  const std::vector<EntResult> ents{{"kelda station", {"station"}, ""}};

  const auto b = retrieval::assemble_bundle(sent, texts, ents, 8);
  const auto flat = b.flatten();

  std::vector<std::string> want = n_tokens(10, "t");
  for (const auto& t : n_tokens(3, "u")) want.push_back(t);
  want.insert(want.end(), {"kelda", "station", "station"});
  CHECK(flat == want);

  REQUIRE(b.provenance.size() == b.num_slices());
  CHECK(b.provenance[0] == Source::kText2Text);
  CHECK(b.provenance[1] == Source::kText2Text);  // 5 text vs 3 ent tokens in slice 2

  SECTION("entity first flips the stream order") {
    const auto eb = retrieval::assemble_bundle(sent, texts, ents, 8, /*entity_first=*/true);
    const auto ef = eb.flatten();
    REQUIRE(ef.size() == want.size());
    CHECK(ef[0] == "kelda");
  }

  SECTION("segment texts reconstruct per-source strings") {
    const auto t2t = b.segment_texts(Source::kText2Text);
    REQUIRE(t2t.size() == 2);
    CHECK(t2t[0] == join(n_tokens(10, "t")));
    const auto e2e = b.segment_texts(Source::kEnt2Ent);
    REQUIRE(e2e.size() == 1);
    CHECK(e2e[0] == "kelda station station");
  }
}

TEST_CASE("anchors mark candidate occurrences in every slice") {
  const Sentence sent({"q"}, "en");
  // context contains "Kelda Station" twice: once in text, once in the splice
  const std::vector<std::string> texts{"the crew reached Kelda Station by night"};
  const std::vector<EntResult> ents{{"kelda station", {"station"}, ""}};
  const auto b = retrieval::assemble_bundle(sent, texts, ents, 16);

  REQUIRE(b.anchors.size() == 2);
  for (const auto& a : b.anchors) {
    const auto& slice = b.slice(a.context_index);
    REQUIRE(a.end <= slice.size());
    std::string joined;
    for (std::size_t i = a.start; i < a.end; ++i) {
      if (!joined.empty()) joined += ' ';
      joined += slice[i];
    }
    CHECK(joined == a.surface);  // anchor surface == tokens at its range
    CHECK(text::normalize_surface(joined) == "kelda station");
  }
}

TEST_CASE("entity coverage") {
  const Sentence s1({"deal", "hudson", "spoke"}, "en");
  const Sentence s2({"kelda", "station", "fell"}, "en");
  Corpus gold;
  gold.emplace_back(s1, bio_encode({make_span(0, 2, "OtherPER")}, 3));
  gold.emplace_back(s2, bio_encode({make_span(0, 2, "Facility")}, 3));

  const auto full1 = retrieval::assemble_bundle(s1, {"Deal Hudson wrote books"}, {}, 8);
  const auto full2 = retrieval::assemble_bundle(s2, {"life aboard Kelda Station"}, {}, 8);
  const auto empty1 = retrieval::assemble_bundle(s1, {}, {}, 8);
  const auto empty2 = retrieval::assemble_bundle(s2, {}, {}, 8);

  CHECK(retrieval::entity_coverage({full1, full2}, gold) == Approx(1.0));
  CHECK(retrieval::entity_coverage({empty1, empty2}, gold) == Approx(0.0));
  CHECK(retrieval::entity_coverage({full1, empty2}, gold) == Approx(0.5));

  SECTION("two of three spans") {
    Corpus gold3 = gold;
    const Sentence s3({"granite", "rock"}, "en");
    gold3.emplace_back(s3, bio_encode({make_span(0, 1, "OtherLOC")}, 2));
    const auto empty3 = retrieval::assemble_bundle(s3, {}, {}, 8);
    CHECK(retrieval::entity_coverage({full1, full2, empty3}, gold3) ==
          Approx(2.0 / 3.0).margin(1e-9));
  }

  SECTION("misaligned lengths are rejected") {
    CHECK_THROWS_WITH(retrieval::entity_coverage({full1}, gold), Catch::Contains("misaligned"));
  }

  SECTION("adding a slice never decreases coverage") {
    std::mt19937_64 rng(3);
    for (int iter = 0; iter < 50; ++iter) {
      std::uniform_int_distribution<int> coin(0, 1);
      auto b1 = coin(rng) ? full1 : empty1;
      const double before = retrieval::entity_coverage({b1, empty2}, gold);
      b1.extra_contexts.push_back({"deal", "hudson"});
      b1.provenance.push_back(Source::kText2Text);
      const double after = retrieval::entity_coverage({b1, empty2}, gold);
      CHECK(after >= before);
    }
  }
}

TEST_CASE("split_in_out requires all spans covered") {
  const Sentence s({"deal", "hudson", "visited", "kelda", "station"}, "en");
  Corpus gold;
  gold.emplace_back(s, bio_encode({make_span(0, 2, "OtherPER"), make_span(3, 5, "Facility")}, 5));

  const auto both = retrieval::assemble_bundle(s, {"Deal Hudson saw Kelda Station"}, {}, 8);
  const auto one = retrieval::assemble_bundle(s, {"Deal Hudson wrote"}, {}, 8);

  const auto [in1, out1] = retrieval::split_in_out({both}, gold);
  CHECK(in1 == std::vector<std::size_t>{0});
  CHECK(out1.empty());

  const auto [in2, out2] = retrieval::split_in_out({one}, gold);
  CHECK(in2.empty());
  CHECK(out2 == std::vector<std::size_t>{0});

  SECTION("span-free sentences are in-context") {
    Corpus none;
    none.emplace_back(s, TagSequence(5, "O"));
    const auto [in3, out3] = retrieval::split_in_out({one}, none);
    CHECK(in3.size() == 1);
  }
}

TEST_CASE("bundle json round trip") {
  const Sentence sent({"deal", "hudson"}, "en");
  const std::vector<EntResult> ents{{"deal hudson", {"human"}, "a person"}};
  auto b = retrieval::assemble_bundle(sent, {join(n_tokens(12))}, ents, 8);
  b.candidates = {"deal hudson"};

  const auto j = retrieval::bundle_to_json(b);
  const auto b2 = retrieval::bundle_from_json(j);
  CHECK(b2.query.tokens == b.query.tokens);
  CHECK(b2.primary_context == b.primary_context);
  CHECK(b2.extra_contexts == b.extra_contexts);
  CHECK(b2.provenance == b.provenance);
  CHECK(b2.candidates == b.candidates);
  REQUIRE(b2.anchors.size() == b.anchors.size());
  for (std::size_t i = 0; i < b.anchors.size(); ++i) {
    CHECK(b2.anchors[i].context_index == b.anchors[i].context_index);
    CHECK(b2.anchors[i].start == b.anchors[i].start);
    CHECK(b2.anchors[i].end == b.anchors[i].end);
    CHECK(b2.anchors[i].surface == b.anchors[i].surface);
  }

  const auto path = std::filesystem::temp_directory_path() / "ragtag_bundles.jsonl";
  retrieval::write_bundles(path.string(), {b, b});
  const auto back = retrieval::read_bundles(path.string());
  std::filesystem::remove(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].primary_context == b.primary_context);

  SECTION("schema version is enforced") {
    auto bad = retrieval::bundle_to_json(b);
    bad["v"] = 999;
    CHECK_THROWS_WITH(retrieval::bundle_from_json(bad), Catch::Contains("version"));
  }
}
