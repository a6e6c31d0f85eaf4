#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "mrrg/kg.hpp"
#include "mrrg/rng.hpp"

using namespace mrrg;

namespace {

struct TempFile {
  std::filesystem::path path;
  explicit TempFile(const std::string& name, const std::string& content) {
    path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path);
    out << content;
  }
  ~TempFile() { std::filesystem::remove(path); }
};

KnowledgeGraph paper_kg() {
  KgBuilder b;
  b.add("nutrient", "relatedto", "soil");
  b.add("soil", "relatedto", "seed");
  b.add("land", "relatedto", "surface");
  b.add("surface", "relatedto", "igneous rock");
  return b.build();
}

}  // namespace

TEST_CASE("load_kg parses, lowercases and dedups", "[kg]") {
  SECTION("single line") {
    TempFile f("kg_single.tsv", "nutrient\trelatedto\tsoil\n");
    KnowledgeGraph kg = KnowledgeGraph::load(f.path.string());
    REQUIRE(kg.triplets().size() == 1);
    const Triplet& t = kg.triplets()[0];
    CHECK(kg.concept_at(t.head).surface == std::vector<std::string>{"nutrient"});
    CHECK(kg.relation(t.rel).name == "relatedto");
    CHECK(kg.concept_at(t.tail).surface == std::vector<std::string>{"soil"});
  }
  SECTION("duplicate lines collapse") {
    TempFile f("kg_dup.tsv", "nutrient\trelatedto\tsoil\nnutrient\trelatedto\tsoil\n");
    KnowledgeGraph kg = KnowledgeGraph::load(f.path.string());
    CHECK(kg.triplets().size() == 1);
  }
  SECTION("five lines, two relations, head index works") {
    TempFile f("kg_five.tsv",
               "# a comment\n"
               "nutrient\trelatedto\tsoil\n"
               "soil\trelatedto\tseed\n"
               "soil\tpartof\tland\n"
               "land\trelatedto\tsurface\n"
               "Seed\tpartof\tPlant\n");
    KnowledgeGraph kg = KnowledgeGraph::load(f.path.string());
    CHECK(kg.triplets().size() == 5);
    CHECK(kg.relations().size() == 2);
    ConceptId soil = kg.find_concept("soil").value();
    REQUIRE(kg.triplets_with_head(soil).size() == 2);
    ConceptId seed = kg.find_concept("seed").value();
    CHECK(kg.triplets_with_head(seed).size() == 1);  // "Seed" lowercased
  }
  SECTION("malformed line names its number") {
    TempFile f("kg_bad.tsv", "nutrient\trelatedto\tsoil\nbroken line no tabs\n");
    try {
      KnowledgeGraph::load(f.path.string());
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
  }
  SECTION("empty file rejected") {
    TempFile f("kg_empty.tsv", "# only comments\n");
    CHECK_THROWS_AS(KnowledgeGraph::load(f.path.string()), ParseError);
  }
  SECTION("self-loop rejected with line number") {
    TempFile f("kg_loop.tsv", "soil\trelatedto\tsoil\n");
    CHECK_THROWS_AS(KnowledgeGraph::load(f.path.string()), ParseError);
  }
}

TEST_CASE("tsv round-trip preserves the graph", "[kg]") {
  KnowledgeGraph kg = paper_kg();
  auto path = std::filesystem::temp_directory_path() / "kg_roundtrip.tsv";
  kg.save_tsv(path.string());
  KnowledgeGraph kg2 = KnowledgeGraph::load(path.string());
  REQUIRE(kg2.triplets().size() == kg.triplets().size());
  for (std::size_t i = 0; i < kg.triplets().size(); ++i) {
    const Triplet& a = kg.triplets()[i];
    const Triplet& b = kg2.triplets()[i];
    CHECK(kg.concept_at(a.head).surface == kg2.concept_at(b.head).surface);
    CHECK(kg.relation(a.rel).name == kg2.relation(b.rel).name);
    CHECK(kg.concept_at(a.tail).surface == kg2.concept_at(b.tail).surface);
  }
  std::filesystem::remove(path);
}

TEST_CASE("extract_entities longest match with plural stripping", "[kg]") {
  KgBuilder b;
  b.add("nutrient", "relatedto", "soil");
  b.add("soil", "relatedto", "seed");
  b.add("rock", "relatedto", "soil");
  b.add("igneous rock", "relatedto", "soil");
  KnowledgeGraph kg = b.build();

  SECTION("plural form maps to singular concept") {
    auto ids = extract_entities(
        split_tokens("less nutrients are added to the soil"), kg);
    REQUIRE(ids.size() == 2);
    CHECK(kg.concept_at(ids[0]).surface == std::vector<std::string>{"nutrient"});
    CHECK(kg.concept_at(ids[1]).surface == std::vector<std::string>{"soil"});
  }
  SECTION("no concepts gives empty result") {
    CHECK(extract_entities(split_tokens("the quick brown fox"), kg).empty());
  }
  SECTION("longest match wins") {
    auto ids = extract_entities(split_tokens("igneous rock forms"), kg);
    REQUIRE(ids.size() == 1);
    CHECK(kg.concept_at(ids[0]).surface ==
          std::vector<std::string>{"igneous", "rock"});
  }
  SECTION("duplicates collapse to first occurrence") {
    auto ids = extract_entities(split_tokens("soil and seeds and soil"), kg);
    REQUIRE(ids.size() == 2);
    CHECK(kg.concept_at(ids[0]).surface == std::vector<std::string>{"soil"});
    CHECK(kg.concept_at(ids[1]).surface == std::vector<std::string>{"seed"});
  }
  SECTION("es plural maps back") {
    KgBuilder b2;
    b2.add("box", "relatedto", "soil");
    KnowledgeGraph kg2 = b2.build();
    auto ids = extract_entities(split_tokens("many boxes here"), kg2);
    REQUIRE(ids.size() == 1);
    CHECK(kg2.concept_at(ids[0]).surface == std::vector<std::string>{"box"});
  }
}

TEST_CASE("extract_entities returns only vocabulary concepts, no overlap", "[kg]") {
  KgBuilder b;
  b.add("soil", "relatedto", "seed");
  b.add("igneous rock", "relatedto", "soil");
  b.add("rock", "partof", "land");
  b.add("land", "relatedto", "surface");
  KnowledgeGraph kg = b.build();
  std::vector<std::string> words = {"igneous", "rock",  "soil", "land",
                                    "surface", "xyzzy", "the",  "seed"};
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> text;
    std::size_t len = 1 + rng.index(12);
    for (std::size_t i = 0; i < len; ++i) text.push_back(words[rng.index(words.size())]);
    auto ids = extract_entities(text, kg);
    std::set<ConceptId> unique(ids.begin(), ids.end());
    CHECK(unique.size() == ids.size());
    for (ConceptId id : ids) {
      CHECK(id >= 0);
      CHECK(id < static_cast<ConceptId>(kg.concepts().size()));
    }
  }
}

TEST_CASE("retrieve_candidates is 1-hop, capped, deterministic", "[kg]") {
  KnowledgeGraph kg = paper_kg();
  ConceptId nutrient = kg.find_concept("nutrient").value();
  ConceptId land = kg.find_concept("land").value();
  ConceptId seed = kg.find_concept("seed").value();

  SECTION("single entity single triplet") {
    auto cands = retrieve_candidates({nutrient}, kg, 50);
    REQUIRE(cands.size() == 1);
    CHECK(cands[0].head == nutrient);
  }
  SECTION("no entities, no candidates") {
    CHECK(retrieve_candidates({}, kg, 50).empty());
  }
  SECTION("retrieval does not hop past the entity") {
    auto cands = retrieve_candidates({land}, kg, 50);
    REQUIRE(cands.size() == 1);
    CHECK(cands[0].head == land);
    CHECK(kg.concept_at(cands[0].tail).surface == std::vector<std::string>{"surface"});
  }
  SECTION("cap truncates in order") {
    auto all = retrieve_candidates({nutrient, land, seed}, kg, 50);
    auto capped = retrieve_candidates({nutrient, land, seed}, kg, 1);
    REQUIRE(capped.size() == 1);
    CHECK(capped[0] == all[0]);
  }
  SECTION("stable across repeated calls and subset of kg") {
    auto a = retrieve_candidates({nutrient, land}, kg, 50);
    auto b = retrieve_candidates({nutrient, land}, kg, 50);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    for (const Triplet& t : a) CHECK(kg.has_triplet(t.head, t.rel, t.tail));
  }
}

TEST_CASE("relation_between direction and tie rule", "[kg]") {
  KgBuilder b;
  b.add("nutrient", "relatedto", "soil");
  b.add("a", "r1", "b");
  b.add("a", "r0", "b");
  KnowledgeGraph kg = b.build();
  ConceptId nutrient = kg.find_concept("nutrient").value();
  ConceptId soil = kg.find_concept("soil").value();
  ConceptId ca = kg.find_concept("a").value();
  ConceptId cb = kg.find_concept("b").value();

  SECTION("forward direction found") {
    auto r = relation_between(nutrient, soil, kg);
    REQUIRE(r.has_value());
    CHECK(kg.relation(*r).name == "relatedto");
  }
  SECTION("reverse direction absent") {
    CHECK_FALSE(relation_between(soil, nutrient, kg).has_value());
  }
  SECTION("two relations resolve to min id") {
    auto r = relation_between(ca, cb, kg);
    REQUIRE(r.has_value());
    CHECK(kg.relation(*r).name == "r1");  // r1 interned first, lower id
    CHECK(*r == std::min(kg.find_relation("r1").value(), kg.find_relation("r0").value()));
  }
  SECTION("non-none iff a triplet exists") {
    for (ConceptId x = 0; x < static_cast<ConceptId>(kg.concepts().size()); ++x)
      for (ConceptId y = 0; y < static_cast<ConceptId>(kg.concepts().size()); ++y) {
        bool any = false;
        for (const Triplet& t : kg.triplets()) any |= (t.head == x && t.tail == y);
        CHECK(relation_between(x, y, kg).has_value() == any);
      }
  }
}
