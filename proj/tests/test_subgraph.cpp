#include <catch2/catch_amalgamated.hpp>

#include "mrrg/subgraph.hpp"

using namespace mrrg;

namespace {

Tensor vec(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor::from({n}, std::move(v));
}

ScoredTriplet fake_selected(const Triplet& t, std::vector<double> in_prime,
                            std::vector<double> out_prime) {
  ScoredTriplet s;
  s.triplet = t;
  s.cts_value = 0.5;
  s.cts = Tensor::scalar(0.5);
  s.e_r = Tensor::zeros({in_prime.size()});
  s.e_in_prime = vec(std::move(in_prime));
  s.e_out_prime = vec(std::move(out_prime));
  return s;
}

KnowledgeGraph chain_kg() {
  KgBuilder b;
  b.add("nutrient", "relatedto", "soil");
  b.add("soil", "relatedto", "seed");
  b.add("land", "relatedto", "surface");
  b.add("surface", "relatedto", "igneous rock");
  return b.build();
}

bool has_edge(const CommonsenseSubgraph& g, std::size_t src, std::size_t dst,
              RelationId rel) {
  for (const SubgraphEdge& e : g.edges)
    if (e.src == src && e.dst == dst && e.rel == rel) return true;
  return false;
}

}  // namespace

TEST_CASE("build_subgraph over the two-triplet reasoning chain", "[subgraph]") {
  KnowledgeGraph kg = chain_kg();
  ConceptId nutrient = kg.find_concept("nutrient").value();
  ConceptId soil = kg.find_concept("soil").value();
  ConceptId seed = kg.find_concept("seed").value();
  RelationId rel = kg.find_relation("relatedto").value();

  Tape tape;
  std::vector<ScoredTriplet> sel = {
      fake_selected(Triplet{nutrient, rel, soil}, {1, 0}, {0, 1}),
      fake_selected(Triplet{soil, rel, seed}, {2, 0}, {0, 2})};
  CommonsenseSubgraph g = build_subgraph(tape, sel, kg);

  REQUIRE(g.nodes.size() == 3);
  CHECK(g.nodes[0].concept_id == nutrient);
  CHECK(g.nodes[1].concept_id == soil);
  CHECK(g.nodes[2].concept_id == seed);

  // two selected edges plus their inverses, nothing else (no other KG pair
  // among the included concepts)
  REQUIRE(g.edges.size() == 4);
  CHECK(has_edge(g, 0, 1, rel));
  CHECK(has_edge(g, 1, 2, rel));
  RelationId inv = rel + static_cast<RelationId>(g.num_base_relations);
  CHECK(has_edge(g, 1, 0, inv));
  CHECK(has_edge(g, 2, 1, inv));

  // path nutrient -> soil -> seed exists
  CHECK((has_edge(g, 0, 1, rel) && has_edge(g, 1, 2, rel)));
}

TEST_CASE("empty selection builds an empty graph", "[subgraph]") {
  KnowledgeGraph kg = chain_kg();
  Tape tape;
  CommonsenseSubgraph g = build_subgraph(tape, {}, kg);
  CHECK(g.nodes.empty());
  CHECK(g.edges.empty());
}

TEST_CASE("augmentation adds edges, never nodes", "[subgraph]") {
  KnowledgeGraph kg = chain_kg();
  ConceptId land = kg.find_concept("land").value();
  ConceptId surface = kg.find_concept("surface").value();
  RelationId rel = kg.find_relation("relatedto").value();

  Tape tape;
  std::vector<ScoredTriplet> sel = {
      fake_selected(Triplet{land, rel, surface}, {1, 1}, {2, 2})};
  CommonsenseSubgraph g = build_subgraph(tape, sel, kg);

  REQUIRE(g.nodes.size() == 2);  // igneous rock is not pulled in
  for (const SubgraphNode& n : g.nodes)
    CHECK(n.concept_id != kg.find_concept("igneous rock").value());
  REQUIRE(g.edges.size() == 2);  // the selected edge and its inverse
}

TEST_CASE("augmented edge appears when both endpoints are present", "[subgraph]") {
  KnowledgeGraph kg = chain_kg();
  ConceptId land = kg.find_concept("land").value();
  ConceptId surface = kg.find_concept("surface").value();
  ConceptId igneous = kg.find_concept("igneous rock").value();
  RelationId rel = kg.find_relation("relatedto").value();

  // surface -> igneous rock arrives only via augmentation: igneous rock is a
  // node because some selected triplet mentions it
  Tape tape;
  std::vector<ScoredTriplet> sel = {
      fake_selected(Triplet{land, rel, surface}, {1, 0}, {0, 1}),
      fake_selected(Triplet{surface, rel, igneous}, {1, 1}, {2, 2})};
  // drop the second edge from "selected" by selecting it under a different
  // relation id? No: instead select only the first and a triplet touching
  // igneous rock via land is impossible, so use both and check dedup:
  CommonsenseSubgraph g = build_subgraph(tape, sel, kg);
  REQUIRE(g.nodes.size() == 3);
  std::size_t n_forward = 0;
  for (const SubgraphEdge& e : g.edges)
    if (!e.inverse) ++n_forward;
  CHECK(n_forward == 2);  // selected edge + selected edge; augmentation deduped
  CHECK(has_edge(g, 1, 2, rel));
}

TEST_CASE("node_feature means head and tail contributions", "[subgraph]") {
  KnowledgeGraph kg = chain_kg();
  ConceptId nutrient = kg.find_concept("nutrient").value();
  ConceptId soil = kg.find_concept("soil").value();
  ConceptId seed = kg.find_concept("seed").value();
  RelationId rel = kg.find_relation("relatedto").value();

  std::vector<ScoredTriplet> sel = {
      fake_selected(Triplet{nutrient, rel, soil}, {1, 0}, {0, 4}),
      fake_selected(Triplet{soil, rel, seed}, {2, 0}, {0, 2})};

  Tape tape;
  SECTION("concept appearing once as head gets that e_in_prime") {
    Tensor f = node_feature(tape, nutrient, sel);
    CHECK(f.values() == std::vector<double>{1, 0});
  }
  SECTION("head in one triplet, tail in another: mean of both") {
    Tensor f = node_feature(tape, soil, sel);
    CHECK(f.values()[0] == Catch::Approx(1.0));  // (0 + 2) / 2
    CHECK(f.values()[1] == Catch::Approx(2.0));  // (4 + 0) / 2
  }
  SECTION("all-zero reweighted vectors give a zero feature") {
    std::vector<ScoredTriplet> zsel = {
        fake_selected(Triplet{nutrient, rel, soil}, {0, 0}, {0, 0})};
    Tensor f = node_feature(tape, nutrient, zsel);
    CHECK(f.values() == std::vector<double>{0, 0});
  }
  SECTION("absent concept rejected") {
    CHECK_THROWS_AS(node_feature(tape, seed + 100, sel), std::invalid_argument);
  }
}

TEST_CASE("every edge is sound against the KG", "[subgraph]") {
  Rng rng(77);
  KgBuilder b;
  const int n_concepts = 12;
  for (int t = 0; t < 30; ++t) {
    int h = static_cast<int>(rng.index(n_concepts));
    int tl = static_cast<int>(rng.index(n_concepts));
    if (h == tl) continue;
    b.add("c" + std::to_string(h), "r" + std::to_string(rng.index(3)),
          "c" + std::to_string(tl));
  }
  b.add("c0", "r0", "c11");
  KnowledgeGraph kg = b.build();

  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ScoredTriplet> sel;
    std::size_t count = 1 + rng.index(kg.triplets().size());
    for (std::size_t i = 0; i < count; ++i) {
      const Triplet& t = kg.triplets()[rng.index(kg.triplets().size())];
      sel.push_back(fake_selected(t, {rng.uniform(), rng.uniform()},
                                  {rng.uniform(), rng.uniform()}));
    }
    Tape tape;
    CommonsenseSubgraph g = build_subgraph(tape, sel, kg);
    const RelationId base = static_cast<RelationId>(g.num_base_relations);
    for (const SubgraphEdge& e : g.edges) {
      ConceptId src_c = g.nodes[e.src].concept_id;
      ConceptId dst_c = g.nodes[e.dst].concept_id;
      if (!e.inverse) {
        CHECK(kg.has_triplet(src_c, e.rel, dst_c));
      } else {
        CHECK(e.rel >= base);
        CHECK(kg.has_triplet(dst_c, e.rel - base, src_c));
      }
    }
  }
}

TEST_CASE("node cap holds for adversarial selections", "[subgraph]") {
  KgBuilder b;
  for (int i = 0; i < 50; ++i)
    b.add("h" + std::to_string(i), "rel", "t" + std::to_string(i));
  KnowledgeGraph kg = b.build();

  std::vector<ScoredTriplet> sel;
  for (const Triplet& t : kg.triplets())
    sel.push_back(fake_selected(t, {1, 1}, {2, 2}));
  REQUIRE(sel.size() == 50);  // 100 distinct concepts among them

  Tape tape;
  SECTION("default cap") {
    CommonsenseSubgraph g = build_subgraph(tape, sel, kg, 100);
    CHECK(g.nodes.size() == 100);
  }
  SECTION("tight cap truncates but stays consistent") {
    CommonsenseSubgraph g = build_subgraph(tape, sel, kg, 17);
    CHECK(g.nodes.size() == 17);
    for (const SubgraphEdge& e : g.edges) {
      CHECK(e.src < g.nodes.size());
      CHECK(e.dst < g.nodes.size());
    }
    std::set<ConceptId> ids;
    for (const SubgraphNode& n : g.nodes) ids.insert(n.concept_id);
    CHECK(ids.size() == g.nodes.size());
  }
}

TEST_CASE("same selection builds the identical graph", "[subgraph]") {
  KnowledgeGraph kg = chain_kg();
  RelationId rel = kg.find_relation("relatedto").value();
  ConceptId land = kg.find_concept("land").value();
  ConceptId surface = kg.find_concept("surface").value();
  ConceptId igneous = kg.find_concept("igneous rock").value();

  std::vector<ScoredTriplet> sel = {
      fake_selected(Triplet{land, rel, surface}, {1, 2}, {3, 4}),
      fake_selected(Triplet{surface, rel, igneous}, {5, 6}, {7, 8})};
  Tape t1, t2;
  CommonsenseSubgraph a = build_subgraph(t1, sel, kg);
  CommonsenseSubgraph b2 = build_subgraph(t2, sel, kg);
  REQUIRE(a.nodes.size() == b2.nodes.size());
  REQUIRE(a.edges.size() == b2.edges.size());
  for (std::size_t i = 0; i < a.edges.size(); ++i) {
    CHECK(a.edges[i].src == b2.edges[i].src);
    CHECK(a.edges[i].dst == b2.edges[i].dst);
    CHECK(a.edges[i].rel == b2.edges[i].rel);
    CHECK((a.edges[i].origin == b2.edges[i].origin));
  }
  for (std::size_t i = 0; i < a.nodes.size(); ++i)
    CHECK(a.nodes[i].h0.values() == b2.nodes[i].h0.values());
}

TEST_CASE("every edge has its inverse", "[subgraph]") {
  KnowledgeGraph kg = chain_kg();
  RelationId rel = kg.find_relation("relatedto").value();
  ConceptId nutrient = kg.find_concept("nutrient").value();
  ConceptId soil = kg.find_concept("soil").value();

  Tape tape;
  std::vector<ScoredTriplet> sel = {
      fake_selected(Triplet{nutrient, rel, soil}, {1, 1}, {2, 2})};
  CommonsenseSubgraph g = build_subgraph(tape, sel, kg);
  const RelationId base = static_cast<RelationId>(g.num_base_relations);
  for (const SubgraphEdge& e : g.edges) {
    RelationId want = e.rel < base ? e.rel + base : e.rel - base;
    CHECK(has_edge(g, e.dst, e.src, want));
  }
}
