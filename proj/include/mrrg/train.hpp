#pragma once

#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mrrg/config.hpp"
#include "mrrg/dataset.hpp"
#include "mrrg/model.hpp"
#include "mrrg/tensor.hpp"

namespace mrrg {

// Adam over a fixed parameter list. Gradients are accumulated per example
// and averaged over the batch before each step.
class Adam {
 public:
  Adam(std::vector<std::pair<std::string, Tensor>> params, const TrainConfig& cfg)
      : params_(std::move(params)),
        lr_(cfg.lr),
        beta1_(cfg.beta1),
        beta2_(cfg.beta2),
        eps_(cfg.adam_eps) {
    for (const auto& [name, p] : params_) {
      m_.emplace_back(p.numel(), 0.0);
      v_.emplace_back(p.numel(), 0.0);
      accum_.emplace_back(p.numel(), 0.0);
    }
  }

  // pull gradients of the current tape into the batch accumulator
  void accumulate() {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const Tensor& p = params_[i].second;
      if (p.grad().empty()) continue;
      const auto& g = p.grad();
      auto& a = accum_[i];
      for (std::size_t j = 0; j < a.size(); ++j) a[j] += g[j];
    }
    ++pending_;
  }

  void step() {
    if (pending_ == 0) return;
    ++t_;
    const double inv = 1.0 / static_cast<double>(pending_);
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& vals = params_[i].second.values();
      auto& m = m_[i];
      auto& v = v_[i];
      auto& a = accum_[i];
      for (std::size_t j = 0; j < vals.size(); ++j) {
        const double g = a[j] * inv;
        m[j] = beta1_ * m[j] + (1.0 - beta1_) * g;
        v[j] = beta2_ * v[j] + (1.0 - beta2_) * g * g;
        vals[j] -= lr_ * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps_);
        a[j] = 0.0;
      }
    }
    pending_ = 0;
  }

  std::size_t steps_taken() const { return t_; }

 private:
  std::vector<std::pair<std::string, Tensor>> params_;
  std::vector<std::vector<double>> m_, v_, accum_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::size_t pending_ = 0;
};

struct EpochLog {
  double mean_loss = 0.0;
  double accuracy = 0.0;
  std::size_t optimizer_steps = 0;
};

struct StageLog {
  std::vector<EpochLog> epochs;
  std::size_t total_steps = 0;
};

// invoked after every epoch; returning false stops training early
using EpochCallback = std::function<bool(std::size_t epoch, const EpochLog&)>;

namespace detail {

inline std::vector<PreparedExample> prepare_all(const std::vector<Example>& dataset,
                                                const KnowledgeGraph& kg,
                                                std::size_t max_candidates) {
  std::vector<PreparedExample> out;
  out.reserve(dataset.size());
  for (const Example& e : dataset) out.push_back(prepare_example(e, kg, max_candidates));
  return out;
}

}  // namespace detail

// Stage I: train the encoder plus KG-attention scorer through the
// triplet-selection head.
inline StageLog train_stage1(const std::vector<Example>& dataset,
                             const KnowledgeGraph& kg, const Vocabulary& vocab,
                             MrrgModel& model, const TrainConfig& cfg,
                             const EpochCallback& after_epoch = {}) {
  if (dataset.empty()) throw std::invalid_argument("train_stage1: empty dataset");
  cfg.validate();
  auto prepared = detail::prepare_all(dataset, kg, model.config.max_candidates);
  // a frozen token table (load_precomputed) keeps its requires_grad state
  for (auto& [name, p] : model.scorer_parameters()) p.set_requires_grad(true);
  Adam opt(model.stage1_parameters(), cfg);
  Rng shuffle_rng(cfg.seed ^ 0x51A6E1ULL);

  StageLog log;
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t in_batch = 0;
    std::size_t steps_before = opt.steps_taken();
    for (std::size_t idx : order) {
      const PreparedExample& p = prepared[idx];
      Tape tape;
      ContextEncoding ctx =
          encode_context(tape, p.q_tokens, p.c_tokens, model.encoder, vocab);
      std::vector<ScoredTriplet> selected;
      if (!p.candidates.empty()) {
        std::vector<TripletEncoding> encs;
        encs.reserve(p.candidates.size());
        for (const Triplet& t : p.candidates)
          encs.push_back(encode_triplet(tape, t, kg, model.encoder, vocab));
        selected = select_and_reweight(tape, ctx, p.candidates, encs, model.attention);
      }
      Tensor logits = stage1_logits(tape, ctx, selected, model.attention);
      Tensor l = cross_entropy(tape, logits, static_cast<std::size_t>(p.label));
      loss_sum += l.item();
      std::size_t best = 0;
      for (std::size_t i = 1; i < logits.numel(); ++i)
        if (logits.values()[i] > logits.values()[best]) best = i;
      if (best == static_cast<std::size_t>(p.label)) ++correct;
      tape.backward(l);
      opt.accumulate();
      if (++in_batch == cfg.batch_size) {
        opt.step();
        in_batch = 0;
      }
    }
    if (in_batch > 0) opt.step();
    EpochLog el;
    el.mean_loss = loss_sum / static_cast<double>(dataset.size());
    el.accuracy = static_cast<double>(correct) / static_cast<double>(dataset.size());
    el.optimizer_steps = opt.steps_taken() - steps_before;
    log.epochs.push_back(el);
    if (el.accuracy >= cfg.stop_train_accuracy) break;
    if (after_epoch && !after_epoch(epoch, el)) break;
  }
  log.total_steps = opt.steps_taken();
  return log;
}

// Stage II: end-to-end answer training on top of the stage-I parameters.
// The scorer stays frozen unless the config unfreezes it.
inline StageLog train_stage2(const std::vector<Example>& dataset,
                             const KnowledgeGraph& kg, const Vocabulary& vocab,
                             MrrgModel& model, const TrainConfig& cfg,
                             const EpochCallback& after_epoch = {}) {
  if (dataset.empty()) throw std::invalid_argument("train_stage2: empty dataset");
  cfg.validate();
  auto prepared = detail::prepare_all(dataset, kg, model.config.max_candidates);
  for (auto& [name, p] : model.scorer_parameters())
    p.set_requires_grad(!cfg.freeze_attention);
  Adam opt(model.stage2_parameters(cfg.freeze_attention), cfg);
  Rng shuffle_rng(cfg.seed ^ 0x57A6E2ULL);

  StageLog log;
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t in_batch = 0;
    std::size_t steps_before = opt.steps_taken();
    for (std::size_t idx : order) {
      const PreparedExample& p = prepared[idx];
      Tape tape;
      Prediction pred = predict_prepared(tape, p, kg, model, vocab);
      Tensor l = cross_entropy(tape, pred.logits, static_cast<std::size_t>(p.label));
      loss_sum += l.item();
      if (pred.argmax == p.label) ++correct;
      tape.backward(l);
      opt.accumulate();
      if (++in_batch == cfg.batch_size) {
        opt.step();
        in_batch = 0;
      }
    }
    if (in_batch > 0) opt.step();
    EpochLog el;
    el.mean_loss = loss_sum / static_cast<double>(dataset.size());
    el.accuracy = static_cast<double>(correct) / static_cast<double>(dataset.size());
    el.optimizer_steps = opt.steps_taken() - steps_before;
    log.epochs.push_back(el);
    if (el.accuracy >= cfg.stop_train_accuracy) break;
    if (after_epoch && !after_epoch(epoch, el)) break;
  }
  log.total_steps = opt.steps_taken();
  return log;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct Metrics {
  double overall = 0.0;
  std::size_t total = 0;
  // indexed by Category
  std::array<std::size_t, 3> category_total{};
  std::array<std::size_t, 3> category_correct{};
  // hop buckets 1..3 plus unknown
  std::map<std::string, std::pair<std::size_t, std::size_t>> hop_buckets;  // correct,total
  std::array<std::array<std::size_t, 3>, 3> confusion{};  // [gold][pred]
};

inline Metrics evaluate(const std::vector<Example>& dataset, const KnowledgeGraph& kg,
                        const Vocabulary& vocab, const MrrgModel& model) {
  Metrics m;
  for (const char* h : {"1", "2", "3"}) m.hop_buckets[h] = {0, 0};
  std::size_t correct = 0;
  for (const Example& ex : dataset) {
    Tape tape(false);
    Prediction pred = predict(tape, ex, kg, model, vocab);
    const bool ok = pred.argmax == ex.label;
    if (ok) ++correct;
    const std::size_t cat = static_cast<std::size_t>(ex.category);
    ++m.category_total[cat];
    if (ok) ++m.category_correct[cat];
    std::string bucket = ex.hops ? std::to_string(*ex.hops) : "unknown";
    auto& [bc, bt] = m.hop_buckets[bucket];
    ++bt;
    if (ok) ++bc;
    ++m.confusion[static_cast<std::size_t>(ex.label)][static_cast<std::size_t>(pred.argmax)];
  }
  m.total = dataset.size();
  m.overall = dataset.empty() ? 0.0
                              : static_cast<double>(correct) /
                                    static_cast<double>(dataset.size());
  return m;
}

inline double category_accuracy(const Metrics& m, Category c) {
  const std::size_t i = static_cast<std::size_t>(c);
  return m.category_total[i] == 0 ? 0.0
                                  : static_cast<double>(m.category_correct[i]) /
                                        static_cast<double>(m.category_total[i]);
}

// {overall, per_category:{in_para,out_of_para,no_effect}, per_hop:{1,2,3},
// confusion}; empty buckets serialize as null
inline nlohmann::json metrics_to_json(const Metrics& m) {
  nlohmann::json j;
  j["overall"] = m.overall;
  nlohmann::json per_cat;
  for (Category c : {Category::in_para, Category::out_of_para, Category::no_effect}) {
    const std::size_t i = static_cast<std::size_t>(c);
    if (m.category_total[i] == 0)
      per_cat[category_name(c)] = nullptr;
    else
      per_cat[category_name(c)] = category_accuracy(m, c);
  }
  j["per_category"] = per_cat;
  nlohmann::json per_hop;
  for (const auto& [bucket, counts] : m.hop_buckets) {
    if (counts.second == 0) {
      if (bucket == "unknown") continue;
      per_hop[bucket] = nullptr;
    } else {
      per_hop[bucket] =
          static_cast<double>(counts.first) / static_cast<double>(counts.second);
    }
  }
  j["per_hop"] = per_hop;
  nlohmann::json confusion = nlohmann::json::array();
  for (std::size_t g = 0; g < 3; ++g) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t p = 0; p < 3; ++p) row.push_back(m.confusion[g][p]);
    confusion.push_back(row);
  }
  j["confusion"] = confusion;
  return j;
}

}  // namespace mrrg
