#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mrrg/subgraph.hpp"
#include "mrrg/tensor.hpp"

namespace mrrg {

// Per-layer relational weights (post inverse expansion), self-loop weights,
// the d->g input projection, and the pooling query.
struct RgcnParams {
  std::size_t d = 64;   // feature width coming in
  std::size_t g = 100;  // node state width
  std::size_t layers = 3;
  std::size_t num_relations = 0;

  Tensor input_proj;                       // (g, d)
  std::vector<std::vector<Tensor>> w_rel;  // [layer][relation], (g, g)
  std::vector<Tensor> w_self;              // [layer], (g, g)
  Tensor pool_query;                       // (g)

  static RgcnParams init(std::size_t d, std::size_t g, std::size_t layers,
                         std::size_t num_relations, Rng& rng) {
    RgcnParams p;
    p.d = d;
    p.g = g;
    p.layers = layers;
    p.num_relations = num_relations;
    p.input_proj = Tensor::param({g, d}, rng, std::sqrt(6.0 / static_cast<double>(d + g)));
    const double wb = std::sqrt(6.0 / static_cast<double>(g + g));
    for (std::size_t l = 0; l < layers; ++l) {
      std::vector<Tensor> rels;
      rels.reserve(num_relations);
      for (std::size_t r = 0; r < num_relations; ++r)
        rels.push_back(Tensor::param({g, g}, rng, wb));
      p.w_rel.push_back(std::move(rels));
      p.w_self.push_back(Tensor::param({g, g}, rng, wb));
    }
    p.pool_query = Tensor::param({g}, rng, std::sqrt(3.0 / static_cast<double>(g)));
    return p;
  }

  void collect_params(const std::string& prefix,
                      std::vector<std::pair<std::string, Tensor>>& out) const {
    out.emplace_back(prefix + ".input_proj", input_proj);
    for (std::size_t l = 0; l < layers; ++l) {
      for (std::size_t r = 0; r < num_relations; ++r)
        out.emplace_back(prefix + ".l" + std::to_string(l) + ".w_rel" + std::to_string(r),
                         w_rel[l][r]);
      out.emplace_back(prefix + ".l" + std::to_string(l) + ".w_self", w_self[l]);
    }
    out.emplace_back(prefix + ".pool_query", pool_query);
  }
};

namespace detail {

// in-neighbor lists per (relation, node), in edge order
inline std::vector<std::vector<std::vector<std::size_t>>> in_neighbors(
    const CommonsenseSubgraph& g, std::size_t num_relations) {
  std::vector<std::vector<std::vector<std::size_t>>> nbrs(
      num_relations, std::vector<std::vector<std::size_t>>(g.size()));
  for (const SubgraphEdge& e : g.edges) nbrs[e.rel][e.dst].push_back(e.src);
  return nbrs;
}

}  // namespace detail

// h^(l+1)_i = relu( sum_r sum_{j in N_i^r} (1/|N_i^r|) W_r h_j + W_0 h_i ),
// starting from h^(0) = P * node feature. Returns stacked (n, g) states.
inline Tensor rgcn_forward(Tape& tape, const CommonsenseSubgraph& g,
                           const RgcnParams& params, std::size_t hops) {
  if (hops > params.layers)
    throw std::invalid_argument("rgcn_forward: " + std::to_string(hops) +
                                " hops exceed the " + std::to_string(params.layers) +
                                " configured layers");
  if (g.size() == 0) return Tensor::zeros({0, params.g});
  if (g.num_relations > params.num_relations)
    throw std::invalid_argument("rgcn_forward: graph uses " +
                                std::to_string(g.num_relations) +
                                " relations, params hold " +
                                std::to_string(params.num_relations));

  auto nbrs = detail::in_neighbors(g, params.num_relations);

  std::vector<Tensor> h;
  h.reserve(g.size());
  for (const SubgraphNode& n : g.nodes)
    h.push_back(matmul(tape, params.input_proj, n.h0));

  for (std::size_t l = 0; l < hops; ++l) {
    std::vector<Tensor> next;
    next.reserve(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      Tensor acc = matmul(tape, params.w_self[l], h[i]);
      for (std::size_t r = 0; r < params.num_relations; ++r) {
        const auto& in = nbrs[r][i];
        if (in.empty()) continue;  // absent relation contributes nothing
        std::vector<Tensor> rows;
        rows.reserve(in.size());
        for (std::size_t j : in) rows.push_back(h[j]);
        Tensor mean = rows.size() == 1 ? rows[0] : mean_rows(tape, stack_rows(tape, rows));
        acc = add(tape, acc, matmul(tape, params.w_rel[l][r], mean));
      }
      next.push_back(relu(tape, acc));
    }
    h = std::move(next);
  }
  return stack_rows(tape, h);
}

// Literal triple-nested transcription of the same update, plain doubles.
// Verification reference only; hard size limits keep it honest.
inline std::vector<std::vector<double>> rgcn_oracle(const CommonsenseSubgraph& g,
                                                    const RgcnParams& params,
                                                    std::size_t hops) {
  if (g.size() > 8 || params.num_relations > 6 || hops > 3)
    throw std::invalid_argument("rgcn_oracle: size limits are n<=8, |R|<=6, L<=3");
  const std::size_t n = g.size();
  const std::size_t gw = params.g;

  std::vector<std::vector<double>> h(n, std::vector<double>(gw, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& feat = g.nodes[i].h0.values();
    for (std::size_t a = 0; a < gw; ++a) {
      double s = 0.0;
      for (std::size_t b = 0; b < feat.size(); ++b)
        s += params.input_proj.values()[a * feat.size() + b] * feat[b];
      h[i][a] = s;
    }
  }

  for (std::size_t l = 0; l < hops; ++l) {
    std::vector<std::vector<double>> next(n, std::vector<double>(gw, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> acc(gw, 0.0);
      for (std::size_t r = 0; r < params.num_relations; ++r) {
        std::vector<std::size_t> in;
        for (const SubgraphEdge& e : g.edges)
          if (e.rel == static_cast<RelationId>(r) && e.dst == i) in.push_back(e.src);
        if (in.empty()) continue;
        const double norm = 1.0 / static_cast<double>(in.size());
        for (std::size_t j : in)
          for (std::size_t a = 0; a < gw; ++a) {
            double s = 0.0;
            for (std::size_t b = 0; b < gw; ++b)
              s += params.w_rel[l][r].values()[a * gw + b] * h[j][b];
            acc[a] += norm * s;
          }
      }
      for (std::size_t a = 0; a < gw; ++a) {
        double s = 0.0;
        for (std::size_t b = 0; b < gw; ++b)
          s += params.w_self[l].values()[a * gw + b] * h[i][b];
        acc[a] += s;
      }
      for (std::size_t a = 0; a < gw; ++a) next[i][a] = acc[a] > 0.0 ? acc[a] : 0.0;
    }
    h = std::move(next);
  }
  return h;
}

// a_i = softmax_i(u . h_i); output sum_i a_i h_i. Empty graph pools to zero.
inline Tensor attentive_pool(Tape& tape, const Tensor& states, const RgcnParams& params) {
  if (states.dim(0) == 0) return Tensor::zeros({params.g});
  Tensor logits = matmul(tape, states, params.pool_query);
  Tensor weights = softmax(tape, logits);
  return matmul(tape, weights, states);
}

}  // namespace mrrg
