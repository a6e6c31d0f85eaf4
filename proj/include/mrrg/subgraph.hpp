#pragma once

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mrrg/kg.hpp"
#include "mrrg/kg_attention.hpp"
#include "mrrg/tensor.hpp"

namespace mrrg {

enum class EdgeOrigin { selected, augmented };

struct SubgraphEdge {
  std::size_t src = 0;
  RelationId rel = -1;  // in inverse-expanded space: base + num_base for r^-1
  std::size_t dst = 0;
  EdgeOrigin origin = EdgeOrigin::selected;
  bool inverse = false;
};

struct SubgraphNode {
  ConceptId concept_id = -1;
  Tensor h0;  // (d)
};

// Capped node set over the selected triplets' concepts plus every KG edge
// between included concepts, with inverse relations expanded.
struct CommonsenseSubgraph {
  std::vector<SubgraphNode> nodes;
  std::vector<SubgraphEdge> edges;
  std::size_t num_base_relations = 0;
  std::size_t num_relations = 0;  // == 2 * num_base_relations

  std::size_t size() const { return nodes.size(); }
};

// mean of e_in_prime where the concept heads a selected triplet and
// e_out_prime where it is the tail
inline Tensor node_feature(Tape& tape, ConceptId concept_id,
                           const std::vector<ScoredTriplet>& selected) {
  std::vector<Tensor> contributions;
  for (const ScoredTriplet& s : selected) {
    if (s.triplet.head == concept_id) contributions.push_back(s.e_in_prime);
    if (s.triplet.tail == concept_id) contributions.push_back(s.e_out_prime);
  }
  if (contributions.empty())
    throw std::invalid_argument("node_feature: concept " +
                                std::to_string(concept_id) +
                                " not in any selected triplet");
  if (contributions.size() == 1) return contributions[0];
  return mean_rows(tape, stack_rows(tape, contributions));
}

inline CommonsenseSubgraph build_subgraph(Tape& tape,
                                          const std::vector<ScoredTriplet>& selected,
                                          const KnowledgeGraph& kg,
                                          std::size_t max_nodes = 100) {
  CommonsenseSubgraph g;
  g.num_base_relations = kg.relations().size();
  g.num_relations = 2 * g.num_base_relations;
  if (selected.empty()) return g;

  // nodes in first-appearance order, honoring the cap
  std::map<ConceptId, std::size_t> index_of;
  auto try_add = [&](ConceptId c) {
    if (index_of.count(c)) return;
    if (g.nodes.size() >= max_nodes) return;
    index_of[c] = g.nodes.size();
    g.nodes.push_back(SubgraphNode{c, Tensor()});
  };
  for (const ScoredTriplet& s : selected) {
    try_add(s.triplet.head);
    try_add(s.triplet.tail);
  }
  for (SubgraphNode& n : g.nodes) n.h0 = node_feature(tape, n.concept_id, selected);

  std::set<std::tuple<std::size_t, RelationId, std::size_t>> present;
  for (const ScoredTriplet& s : selected) {
    auto hi = index_of.find(s.triplet.head);
    auto ti = index_of.find(s.triplet.tail);
    if (hi == index_of.end() || ti == index_of.end()) continue;  // truncated away
    auto key = std::make_tuple(hi->second, s.triplet.rel, ti->second);
    if (present.count(key)) continue;
    present.insert(key);
    g.edges.push_back(
        SubgraphEdge{hi->second, s.triplet.rel, ti->second, EdgeOrigin::selected, false});
  }

  // an edge for every ordered concept pair the KG connects
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    for (std::size_t j = 0; j < g.nodes.size(); ++j) {
      if (i == j) continue;
      auto rel = kg.relation_between(g.nodes[i].concept_id, g.nodes[j].concept_id);
      if (!rel) continue;
      auto key = std::make_tuple(i, *rel, j);
      if (present.count(key)) continue;
      present.insert(key);
      g.edges.push_back(SubgraphEdge{i, *rel, j, EdgeOrigin::augmented, false});
    }
  }

  // inverse expansion: (i, r, j) gains (j, r + |R|, i)
  const std::size_t base_edges = g.edges.size();
  const RelationId offset = static_cast<RelationId>(g.num_base_relations);
  g.edges.reserve(2 * base_edges);
  for (std::size_t e = 0; e < base_edges; ++e) {
    const SubgraphEdge& fwd = g.edges[e];
    g.edges.push_back(
        SubgraphEdge{fwd.dst, fwd.rel + offset, fwd.src, fwd.origin, true});
  }
  return g;
}

}  // namespace mrrg
