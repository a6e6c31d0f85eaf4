#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "mrrg/config.hpp"
#include "mrrg/dataset.hpp"
#include "mrrg/encoder.hpp"
#include "mrrg/interaction.hpp"
#include "mrrg/kg.hpp"
#include "mrrg/kg_attention.hpp"
#include "mrrg/rgcn.hpp"
#include "mrrg/subgraph.hpp"
#include "mrrg/tensor.hpp"

namespace mrrg {

// Every learnable parameter across the pipeline, plus the answer head
// MLP over F = [E_cls; F_q2c; F_c2q; E'_Gs].
struct MrrgModel {
  ModelConfig config;
  std::size_t num_base_relations = 0;

  EncoderParams encoder;
  AttentionParams attention;
  RgcnParams rgcn;
  InteractionParams interaction;
  DenseLayer answer1;  // (3d + g) -> d, relu
  DenseLayer answer2;  // d -> labels

  static MrrgModel init(const ModelConfig& cfg, std::size_t vocab_size,
                        std::size_t num_base_relations, Rng& rng) {
    cfg.validate();
    MrrgModel m;
    m.config = cfg;
    m.num_base_relations = num_base_relations;
    m.encoder = EncoderParams::init(vocab_size, cfg.d, cfg.max_context_tokens, rng);
    m.attention = AttentionParams::init(cfg.d, cfg.top_k, cfg.num_labels, rng);
    m.rgcn = RgcnParams::init(cfg.d, cfg.g, cfg.hops, 2 * num_base_relations, rng);
    auto sim = cfg.sim == "trilinear" ? InteractionParams::Sim::trilinear
                                      : InteractionParams::Sim::dot;
    m.interaction = InteractionParams::init(cfg.d, sim, cfg.strict_interaction, rng);
    m.answer1 = DenseLayer::init(3 * cfg.d + cfg.g, cfg.d, DenseLayer::Act::relu, rng);
    m.answer2 = DenseLayer::init(cfg.d, cfg.num_labels, DenseLayer::Act::none, rng);
    return m;
  }

  std::vector<std::pair<std::string, Tensor>> named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    encoder.collect_params("encoder", out);
    attention.collect_params("attention", out);
    rgcn.collect_params("rgcn", out);
    interaction.collect_params("interaction", out);
    answer1.collect_params("answer1", out);
    answer2.collect_params("answer2", out);
    return out;
  }

  // triplet-selection parameters kept fixed by stage-II's freeze flag
  std::vector<std::pair<std::string, Tensor>> scorer_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    attention.score_hidden.collect_params("attention.score_hidden", out);
    attention.score_out.collect_params("attention.score_out", out);
    attention.f_in.collect_params("attention.f_in", out);
    attention.f_out.collect_params("attention.f_out", out);
    return out;
  }

  std::vector<std::pair<std::string, Tensor>> stage1_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    encoder.collect_params("encoder", out);
    attention.collect_params("attention", out);
    return out;
  }

  std::vector<std::pair<std::string, Tensor>> stage2_parameters(
      bool freeze_attention) const {
    std::vector<std::pair<std::string, Tensor>> out;
    encoder.collect_params("encoder", out);
    if (!freeze_attention) {
      attention.score_hidden.collect_params("attention.score_hidden", out);
      attention.score_out.collect_params("attention.score_out", out);
      attention.f_in.collect_params("attention.f_in", out);
      attention.f_out.collect_params("attention.f_out", out);
    }
    rgcn.collect_params("rgcn", out);
    interaction.collect_params("interaction", out);
    answer1.collect_params("answer1", out);
    answer2.collect_params("answer2", out);
    return out;
  }
};

// tokenization, entity matching and retrieval are model-independent, so
// training loops cache them per example
struct PreparedExample {
  std::vector<std::string> q_tokens;
  std::vector<std::string> c_tokens;
  std::vector<ConceptId> entities;
  std::vector<Triplet> candidates;
  Label label = Label::no_effect;
};

inline PreparedExample prepare_example(const Example& ex, const KnowledgeGraph& kg,
                                       std::size_t max_candidates) {
  PreparedExample p;
  p.q_tokens = ex.question_tokens();
  p.c_tokens = ex.paragraph_tokens();
  p.label = ex.label;
  if (ex.entities) {
    for (const std::string& surface : *ex.entities)
      if (auto id = kg.find_concept(to_lower(surface))) p.entities.push_back(*id);
  } else {
    std::vector<std::string> all = p.q_tokens;
    all.insert(all.end(), p.c_tokens.begin(), p.c_tokens.end());
    p.entities = extract_entities(all, kg);
  }
  p.candidates = retrieve_candidates(p.entities, kg, max_candidates);
  return p;
}

// selection and construction trace for the extract-subgraph interface
struct PredictDetails {
  std::vector<Triplet> candidates;
  std::vector<double> cts;
  std::vector<std::size_t> selected;
  CommonsenseSubgraph subgraph;
};

struct Prediction {
  Tensor logits;              // tape-connected, length num_labels
  std::vector<double> probs;  // softmax of logits
  Label argmax = Label::more;
};

inline Prediction predict_prepared(Tape& tape, const PreparedExample& p,
                                   const KnowledgeGraph& kg, const MrrgModel& m,
                                   const Vocabulary& vocab,
                                   PredictDetails* details = nullptr) {
  ContextEncoding ctx = encode_context(tape, p.q_tokens, p.c_tokens, m.encoder, vocab);

  Tensor e_gs;
  if (m.config.ablate_graph || p.candidates.empty()) {
    e_gs = Tensor::zeros({m.config.g});
    if (details) details->candidates = p.candidates;
  } else {
    std::vector<TripletEncoding> encs;
    encs.reserve(p.candidates.size());
    for (const Triplet& t : p.candidates)
      encs.push_back(encode_triplet(tape, t, kg, m.encoder, vocab));
    std::vector<ScoredTriplet> selected =
        select_and_reweight(tape, ctx, p.candidates, encs, m.attention);
    CommonsenseSubgraph sg = build_subgraph(tape, selected, kg, m.config.max_nodes);
    Tensor states = rgcn_forward(tape, sg, m.rgcn, m.config.hops);
    e_gs = attentive_pool(tape, states, m.rgcn);
    if (details) {
      details->candidates = p.candidates;
      Tape score_tape(false);
      Tensor cts = score_triplets(score_tape, ctx, encs, m.attention);
      details->cts = cts.values();
      for (const ScoredTriplet& s : selected)
        for (std::size_t i = 0; i < p.candidates.size(); ++i)
          if (p.candidates[i] == s.triplet) {
            details->selected.push_back(i);
            break;
          }
      details->subgraph = sg;
    }
  }

  Tensor f_q2c, f_c2q;
  if (m.config.ablate_interaction) {
    f_q2c = Tensor::zeros({m.config.d});
    f_c2q = Tensor::zeros({m.config.d});
  } else {
    InteractionOutput io = interact(tape, ctx.e_q, ctx.e_c, m.interaction);
    f_q2c = io.f_q2c;
    f_c2q = io.f_c2q;
  }

  Tensor f = concat(tape, {ctx.e_cls, f_q2c, f_c2q, e_gs});
  Tensor logits = m.answer2.apply(tape, m.answer1.apply(tape, f));

  Prediction pred;
  pred.logits = logits;
  pred.probs.resize(logits.numel());
  detail::softmax_inplace(logits.values().data(), pred.probs.data(), logits.numel());
  std::size_t best = 0;
  for (std::size_t i = 1; i < pred.probs.size(); ++i)
    if (pred.probs[i] > pred.probs[best]) best = i;
  pred.argmax = static_cast<Label>(best);
  return pred;
}

inline Prediction predict(Tape& tape, const Example& ex, const KnowledgeGraph& kg,
                          const MrrgModel& m, const Vocabulary& vocab,
                          PredictDetails* details = nullptr) {
  PreparedExample p = prepare_example(ex, kg, m.config.max_candidates);
  return predict_prepared(tape, p, kg, m, vocab, details);
}

// -log prob[gold]; the training path drives cross_entropy on logits instead
inline double loss(const std::vector<double>& prob, Label gold) {
  return nll(prob, static_cast<std::size_t>(gold));
}

}  // namespace mrrg
