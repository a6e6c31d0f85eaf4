#pragma once

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mrrg/checkpoint.hpp"
#include "mrrg/config.hpp"
#include "mrrg/dump.hpp"
#include "mrrg/synth.hpp"
#include "mrrg/train.hpp"

namespace mrrg {

struct StageError : std::runtime_error {
  std::string stage;
  StageError(std::string stage_, const std::string& what)
      : std::runtime_error(what), stage(std::move(stage_)) {}
};

struct ExperimentConfig {
  Config config;
  std::optional<SynthSpec> synth;
  std::string kg_path, train_path, dev_path, test_path;
  std::string out_dir = "experiment-out";
  TrainConfig stage1, stage2;
  std::string eval_split = "test";
  std::size_t selection_dumps = 10;

  static ExperimentConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open experiment config " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path + ": " + e.what());
    }
    ExperimentConfig ec;
    ec.config = config_from_json(j);
    ec.stage1 = ec.config.train;
    ec.stage2 = ec.config.train;
    if (j.contains("stage1")) from_json_into(j.at("stage1"), ec.stage1);
    if (j.contains("stage2")) from_json_into(j.at("stage2"), ec.stage2);
    if (j.contains("synth")) ec.synth = SynthSpec::from_json(j.at("synth"));
    if (j.contains("data")) {
      const auto& d = j.at("data");
      ec.kg_path = d.value("kg", "");
      ec.train_path = d.value("train", "");
      ec.dev_path = d.value("dev", "");
      ec.test_path = d.value("test", "");
    }
    ec.out_dir = j.value("out_dir", ec.out_dir);
    ec.eval_split = j.value("eval_split", ec.eval_split);
    ec.selection_dumps = j.value("selection_dumps", ec.selection_dumps);
    if (!ec.synth && (ec.kg_path.empty() || ec.train_path.empty() || ec.test_path.empty()))
      throw ConfigError(path + ": either synth or data{kg,train,test} is required");
    return ec;
  }
};

struct ExperimentResult {
  Metrics metrics;
  StageLog stage1_log, stage2_log;
  std::string metrics_path;
};

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

// gen/load -> stage1 -> stage2 -> evaluate, artifacts under out_dir
inline ExperimentResult run_experiment(const ExperimentConfig& ec) {
  namespace fs = std::filesystem;
  ExperimentResult result;
  fs::create_directories(ec.out_dir);

  KnowledgeGraph kg;
  std::vector<Example> train, dev, test;
  try {
    if (ec.synth) {
      SynthData data = gen_synthetic(*ec.synth);
      kg = std::move(data.kg);
      train = std::move(data.train);
      dev = std::move(data.dev);
      test = std::move(data.test);
      kg.save_tsv(ec.out_dir + "/kg.tsv");
      save_dataset(ec.out_dir + "/train.jsonl", train);
      save_dataset(ec.out_dir + "/dev.jsonl", dev);
      save_dataset(ec.out_dir + "/test.jsonl", test);
    } else {
      kg = KnowledgeGraph::load(ec.kg_path);
      train = load_dataset(ec.train_path);
      if (!ec.dev_path.empty()) dev = load_dataset(ec.dev_path);
      test = load_dataset(ec.test_path);
    }
  } catch (const std::exception& e) {
    throw StageError("data", e.what());
  }

  std::vector<std::vector<std::string>> texts;
  for (const Example& e : train) {
    texts.push_back(e.question_tokens());
    texts.push_back(e.paragraph_tokens());
  }
  Vocabulary vocab = Vocabulary::build(kg, texts);

  Rng init_rng(ec.stage1.seed);
  MrrgModel model =
      MrrgModel::init(ec.config.model, vocab.size(), kg.relations().size(), init_rng);

  try {
    result.stage1_log = train_stage1(train, kg, vocab, model, ec.stage1);
    save_checkpoint(ec.out_dir + "/stage1.ckpt", model.named_parameters());
    vocab.save(ec.out_dir + "/stage1.ckpt.vocab");
  } catch (const std::exception& e) {
    throw StageError("stage1", e.what());
  }

  try {
    result.stage2_log = train_stage2(train, kg, vocab, model, ec.stage2);
    save_checkpoint(ec.out_dir + "/model.ckpt", model.named_parameters());
    vocab.save(ec.out_dir + "/model.ckpt.vocab");
  } catch (const std::exception& e) {
    throw StageError("stage2", e.what());
  }

  try {
    const std::vector<Example>& eval_set =
        ec.eval_split == "train" ? train : (ec.eval_split == "dev" ? dev : test);
    result.metrics = evaluate(eval_set, kg, vocab, model);
    result.metrics_path = ec.out_dir + "/metrics.json";
    write_json_file(result.metrics_path, metrics_to_json(result.metrics));

    nlohmann::json dumps = nlohmann::json::array();
    for (std::size_t i = 0; i < eval_set.size() && i < ec.selection_dumps; ++i)
      dumps.push_back(selection_dump(eval_set[i], kg, model, vocab));
    write_json_file(ec.out_dir + "/selections.json", dumps);
  } catch (const std::exception& e) {
    throw StageError("evaluate", e.what());
  }
  return result;
}

}  // namespace mrrg
