#pragma once

#include <string>

#include <json.hpp>

#include "mrrg/model.hpp"
#include "mrrg/subgraph.hpp"

namespace mrrg {

inline nlohmann::json triplet_to_json(const Triplet& t, const KnowledgeGraph& kg) {
  return nlohmann::json{{"head", join_tokens(kg.concept_at(t.head).surface)},
                        {"relation", kg.relation(t.rel).name},
                        {"tail", join_tokens(kg.concept_at(t.tail).surface)}};
}

inline nlohmann::json subgraph_to_json(const CommonsenseSubgraph& g,
                                       const KnowledgeGraph& kg) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const SubgraphNode& n : g.nodes)
    nodes.push_back({{"concept", join_tokens(kg.concept_at(n.concept_id).surface)}});
  nlohmann::json edges = nlohmann::json::array();
  const RelationId base = static_cast<RelationId>(g.num_base_relations);
  for (const SubgraphEdge& e : g.edges) {
    const RelationId rel = e.inverse ? e.rel - base : e.rel;
    edges.push_back({{"src", e.src},
                     {"dst", e.dst},
                     {"relation", kg.relation(rel).name},
                     {"origin", e.origin == EdgeOrigin::selected ? "selected" : "augmented"},
                     {"inverse", e.inverse}});
  }
  return nlohmann::json{{"nodes", nodes},
                        {"edges", edges},
                        {"num_relations", g.num_relations}};
}

// candidates, cts scores, selected indices and the constructed subgraph for
// one example, as served by the extract-subgraph command
inline nlohmann::json selection_dump(const Example& ex, const KnowledgeGraph& kg,
                                     const MrrgModel& model, const Vocabulary& vocab) {
  Tape tape(false);
  PredictDetails details;
  Prediction pred = predict(tape, ex, kg, model, vocab, &details);

  nlohmann::json cands = nlohmann::json::array();
  for (std::size_t i = 0; i < details.candidates.size(); ++i) {
    nlohmann::json c = triplet_to_json(details.candidates[i], kg);
    if (i < details.cts.size()) c["cts"] = details.cts[i];
    cands.push_back(c);
  }
  nlohmann::json j;
  j["example_id"] = ex.id;
  j["candidates"] = cands;
  j["selected"] = details.selected;
  j["subgraph"] = subgraph_to_json(details.subgraph, kg);
  j["prediction"] = {{"probs", pred.probs}, {"label", label_name(pred.argmax)}};
  return j;
}

}  // namespace mrrg
