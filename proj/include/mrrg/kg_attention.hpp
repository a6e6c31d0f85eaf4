#pragma once

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mrrg/encoder.hpp"
#include "mrrg/kg.hpp"
#include "mrrg/recurrent.hpp"
#include "mrrg/tensor.hpp"

namespace mrrg {

// candidate triplet with its importance score and reweighted embeddings
struct ScoredTriplet {
  Triplet triplet;
  double cts_value = 0.0;
  Tensor cts;  // scalar, tape-connected so gradients reach the scorer
  Tensor e_r;
  Tensor e_in_prime;
  Tensor e_out_prime;
};

// Scorer, reweighting MLPs and the stage-I training head. Everything here
// belongs to the triplet-selection module and is the freeze set for
// stage-II training.
struct AttentionParams {
  std::size_t d = 64;
  std::size_t top_k = 50;
  std::size_t num_labels = 3;

  DenseLayer score_hidden;  // 4d -> d, tanh
  DenseLayer score_out;     // d -> 1
  DenseLayer f_in;          // 2d -> d, tanh
  DenseLayer f_out;         // 2d -> d, tanh
  DenseLayer head1;         // (3 + 2k)d -> 2d, relu
  DenseLayer head2;         // 2d -> d, relu
  DenseLayer head3;         // d -> labels

  static AttentionParams init(std::size_t d, std::size_t top_k,
                              std::size_t num_labels, Rng& rng) {
    AttentionParams p;
    p.d = d;
    p.top_k = top_k;
    p.num_labels = num_labels;
    p.score_hidden = DenseLayer::init(4 * d, d, DenseLayer::Act::tanh, rng);
    p.score_out = DenseLayer::init(d, 1, DenseLayer::Act::none, rng);
    p.f_in = DenseLayer::init(2 * d, d, DenseLayer::Act::tanh, rng);
    p.f_out = DenseLayer::init(2 * d, d, DenseLayer::Act::tanh, rng);
    const std::size_t concat_width = (3 + 2 * top_k) * d;
    p.head1 = DenseLayer::init(concat_width, 2 * d, DenseLayer::Act::relu, rng);
    p.head2 = DenseLayer::init(2 * d, d, DenseLayer::Act::relu, rng);
    p.head3 = DenseLayer::init(d, num_labels, DenseLayer::Act::none, rng);
    return p;
  }

  void collect_params(const std::string& prefix,
                      std::vector<std::pair<std::string, Tensor>>& out) const {
    score_hidden.collect_params(prefix + ".score_hidden", out);
    score_out.collect_params(prefix + ".score_out", out);
    f_in.collect_params(prefix + ".f_in", out);
    f_out.collect_params(prefix + ".f_out", out);
    head1.collect_params(prefix + ".head1", out);
    head2.collect_params(prefix + ".head2", out);
    head3.collect_params(prefix + ".head3", out);
  }
};

// Context-triplet importance: per candidate, MLP over [E_cls; E_in; E_r;
// E_out], then softmax across the whole candidate list.
inline Tensor score_triplets(Tape& tape, const ContextEncoding& ctx,
                             const std::vector<TripletEncoding>& cands,
                             const AttentionParams& params) {
  if (cands.empty())
    throw std::invalid_argument("score_triplets: empty candidate list");
  std::vector<Tensor> logits;
  logits.reserve(cands.size());
  for (const TripletEncoding& t : cands) {
    Tensor ez = concat(tape, {ctx.e_cls, t.e_in, t.e_r, t.e_out});
    Tensor hidden = params.score_hidden.apply(tape, ez);
    logits.push_back(params.score_out.apply(tape, hidden));
  }
  return softmax(tape, concat(tape, logits));
}

// Discrete top-k by score, ties broken by lower candidate index. No
// gradient flows through the ranking itself.
inline std::vector<std::pair<std::size_t, double>> select_top_k(
    const std::vector<double>& scores, std::size_t k) {
  if (k == 0) throw std::invalid_argument("select_top_k: k must be positive");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  std::vector<std::pair<std::size_t, double>> out;
  const std::size_t take = std::min(k, scores.size());
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.emplace_back(order[i], scores[order[i]]);
  return out;
}

// E'_in = f_in([cts*E_in; cts*E_r]), E'_out = f_out([cts*E_out; cts*E_r])
inline std::pair<Tensor, Tensor> reweight(Tape& tape, const TripletEncoding& enc,
                                          const Tensor& cts,
                                          const AttentionParams& params) {
  Tensor in_scaled = mul(tape, cts, enc.e_in);
  Tensor r_scaled = mul(tape, cts, enc.e_r);
  Tensor out_scaled = mul(tape, cts, enc.e_out);
  Tensor e_in_prime = params.f_in.apply(tape, concat(tape, {in_scaled, r_scaled}));
  Tensor e_out_prime = params.f_out.apply(tape, concat(tape, {out_scaled, r_scaled}));
  return {e_in_prime, e_out_prime};
}

// Stage-I head over [E_cls; mean(E_q); mean(E_C); E'_1 ... E'_k], the
// triplet slots zero-padded to exactly k entries.
inline Tensor stage1_logits(Tape& tape, const ContextEncoding& ctx,
                            const std::vector<ScoredTriplet>& selected,
                            const AttentionParams& params) {
  if (selected.size() > params.top_k)
    throw std::invalid_argument("stage1_logits: more triplets than k");
  std::vector<Tensor> parts;
  parts.reserve(3 + 2 * params.top_k);
  parts.push_back(ctx.e_cls);
  parts.push_back(mean_rows(tape, ctx.e_q));
  parts.push_back(mean_rows(tape, ctx.e_c));
  for (const ScoredTriplet& s : selected) {
    parts.push_back(s.e_in_prime);
    parts.push_back(s.e_out_prime);
  }
  for (std::size_t i = selected.size(); i < params.top_k; ++i) {
    parts.push_back(Tensor::zeros({params.d}));
    parts.push_back(Tensor::zeros({params.d}));
  }
  Tensor x = concat(tape, parts);
  return params.head3.apply(tape, params.head2.apply(tape, params.head1.apply(tape, x)));
}

// score -> select -> reweight for one candidate list
inline std::vector<ScoredTriplet> select_and_reweight(
    Tape& tape, const ContextEncoding& ctx, const std::vector<Triplet>& cands,
    const std::vector<TripletEncoding>& encs, const AttentionParams& params) {
  Tensor cts = score_triplets(tape, ctx, encs, params);
  auto picked = select_top_k(cts.values(), params.top_k);
  std::vector<ScoredTriplet> out;
  out.reserve(picked.size());
  for (const auto& [idx, score] : picked) {
    ScoredTriplet st;
    st.triplet = cands[idx];
    st.cts_value = score;
    st.cts = slice(tape, cts, idx, 1);
    st.e_r = encs[idx].e_r;
    auto [in_p, out_p] = reweight(tape, encs[idx], st.cts, params);
    st.e_in_prime = in_p;
    st.e_out_prime = out_p;
    out.push_back(std::move(st));
  }
  return out;
}

}  // namespace mrrg
