#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "mrrg/encoder.hpp"

namespace mrrg {

struct ModelConfig {
  std::size_t d = 64;
  std::size_t g = 100;
  std::size_t hops = 3;
  std::size_t top_k = 50;
  std::size_t max_candidates = 50;
  std::size_t max_nodes = 100;
  std::size_t max_context_tokens = 256;
  std::size_t num_labels = 3;
  std::string sim = "dot";  // dot | trilinear
  bool strict_interaction = false;
  bool ablate_graph = false;        // text only: E'_Gs forced to zero
  bool ablate_interaction = false;  // F_q2c / F_c2q forced to zero

  void validate() const {
    if (d == 0 || g == 0) throw ConfigError("config: d and g must be positive");
    if (top_k == 0 || top_k > 50) throw ConfigError("config: top_k must be in 1..50");
    if (max_candidates == 0 || max_candidates > 50)
      throw ConfigError("config: max_candidates must be in 1..50");
    if (hops > 3) throw ConfigError("config: hops must be at most 3");
    if (num_labels < 2) throw ConfigError("config: need at least 2 labels");
    if (sim != "dot" && sim != "trilinear")
      throw ConfigError("config: sim must be dot or trilinear");
  }
};

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  bool freeze_attention = true;
  // stop early once train accuracy reaches this level; 1.1 disables
  double stop_train_accuracy = 1.1;

  void validate() const {
    if (lr <= 0.0) throw ConfigError("config: lr must be positive");
    if (batch_size == 0) throw ConfigError("config: batch_size must be positive");
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
      throw ConfigError("config: betas must lie in [0,1)");
  }
};

struct Config {
  ModelConfig model;
  TrainConfig train;

  void validate() const {
    model.validate();
    train.validate();
  }
};

// "desk" favors from-scratch desk-scale training; "paper" mirrors the
// reported hyperparameters (intended for a pretrained-LM-backed encoder)
inline void apply_preset(Config& cfg, const std::string& preset) {
  if (preset == "desk") {
    cfg.train.lr = 1e-3;
    cfg.model.d = 64;
    cfg.model.g = 100;
    cfg.model.hops = 3;
  } else if (preset == "paper") {
    cfg.train.lr = 1e-5;
    cfg.model.g = 100;
    cfg.model.hops = 3;
  } else {
    throw ConfigError("unknown preset '" + preset + "' (expected desk or paper)");
  }
}

inline void from_json_into(const nlohmann::json& j, ModelConfig& m) {
  m.d = j.value("d", m.d);
  m.g = j.value("g", m.g);
  m.hops = j.value("hops", m.hops);
  m.top_k = j.value("top_k", m.top_k);
  m.max_candidates = j.value("max_candidates", m.max_candidates);
  m.max_nodes = j.value("max_nodes", m.max_nodes);
  m.max_context_tokens = j.value("max_context_tokens", m.max_context_tokens);
  m.num_labels = j.value("num_labels", m.num_labels);
  m.sim = j.value("sim", m.sim);
  m.strict_interaction = j.value("strict_interaction", m.strict_interaction);
  m.ablate_graph = j.value("ablate_graph", m.ablate_graph);
  m.ablate_interaction = j.value("ablate_interaction", m.ablate_interaction);
}

inline void from_json_into(const nlohmann::json& j, TrainConfig& t) {
  t.lr = j.value("lr", t.lr);
  t.beta1 = j.value("beta1", t.beta1);
  t.beta2 = j.value("beta2", t.beta2);
  t.adam_eps = j.value("adam_eps", t.adam_eps);
  t.epochs = j.value("epochs", t.epochs);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.seed = j.value("seed", t.seed);
  t.freeze_attention = j.value("freeze_attention", t.freeze_attention);
  t.stop_train_accuracy = j.value("stop_train_accuracy", t.stop_train_accuracy);
}

inline Config config_from_json(const nlohmann::json& j) {
  Config cfg;
  if (j.contains("preset")) apply_preset(cfg, j.at("preset").get<std::string>());
  if (j.contains("model")) from_json_into(j.at("model"), cfg.model);
  if (j.contains("train")) from_json_into(j.at("train"), cfg.train);
  cfg.validate();
  return cfg;
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return config_from_json(j);
}

inline nlohmann::json config_to_json(const Config& cfg) {
  nlohmann::json j;
  j["model"] = {{"d", cfg.model.d},
                {"g", cfg.model.g},
                {"hops", cfg.model.hops},
                {"top_k", cfg.model.top_k},
                {"max_candidates", cfg.model.max_candidates},
                {"max_nodes", cfg.model.max_nodes},
                {"max_context_tokens", cfg.model.max_context_tokens},
                {"num_labels", cfg.model.num_labels},
                {"sim", cfg.model.sim},
                {"strict_interaction", cfg.model.strict_interaction},
                {"ablate_graph", cfg.model.ablate_graph},
                {"ablate_interaction", cfg.model.ablate_interaction}};
  j["train"] = {{"lr", cfg.train.lr},
                {"beta1", cfg.train.beta1},
                {"beta2", cfg.train.beta2},
                {"adam_eps", cfg.train.adam_eps},
                {"epochs", cfg.train.epochs},
                {"batch_size", cfg.train.batch_size},
                {"seed", cfg.train.seed},
                {"freeze_attention", cfg.train.freeze_attention},
                {"stop_train_accuracy", cfg.train.stop_train_accuracy}};
  return j;
}

}  // namespace mrrg
