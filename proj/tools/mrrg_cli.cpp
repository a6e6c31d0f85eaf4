#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mrrg/mrrg.hpp"

namespace fs = std::filesystem;
using namespace mrrg;

namespace {

Vocabulary vocab_for(const std::string& ckpt_path) {
  const std::string vocab_path = ckpt_path + ".vocab";
  if (!fs::exists(vocab_path))
    throw std::runtime_error("missing vocabulary sidecar " + vocab_path +
                             " (it is written next to every checkpoint)");
  return Vocabulary::load(vocab_path);
}

Config load_config_with_overrides(const std::string& path, const std::string& preset,
                                  std::optional<std::uint64_t> seed) {
  Config cfg = load_config(path);
  if (!preset.empty()) apply_preset(cfg, preset);
  if (seed) cfg.train.seed = *seed;
  cfg.validate();
  return cfg;
}

MrrgModel model_from_checkpoint(const std::string& ckpt, const Config& cfg,
                                const Vocabulary& vocab, const KnowledgeGraph& kg) {
  Rng rng(cfg.train.seed);
  MrrgModel model =
      MrrgModel::init(cfg.model, vocab.size(), kg.relations().size(), rng);
  apply_checkpoint(load_checkpoint(ckpt), model.named_parameters(), ckpt);
  return model;
}

Vocabulary build_train_vocab(const KnowledgeGraph& kg, const std::vector<Example>& data) {
  std::vector<std::vector<std::string>> texts;
  for (const Example& e : data) {
    texts.push_back(e.question_tokens());
    texts.push_back(e.paragraph_tokens());
  }
  return Vocabulary::build(kg, texts);
}

void print_stage_log(const std::string& stage, const StageLog& log) {
  for (std::size_t i = 0; i < log.epochs.size(); ++i) {
    const EpochLog& e = log.epochs[i];
    std::cout << stage << " epoch " << (i + 1) << ": loss " << e.mean_loss
              << ", accuracy " << e.accuracy << ", steps " << e.optimizer_steps
              << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MRRG pipeline: triplet selection, subgraph reasoning and what-if answering"};
  app.require_subcommand(1);

  std::string preset;
  std::optional<std::uint64_t> seed;
  app.add_option("--preset", preset, "hyperparameter preset: desk or paper");
  app.add_option("--seed", seed, "override the config seed");

  // build-kg
  auto* build_kg = app.add_subcommand("build-kg", "load, validate and index a KG TSV");
  std::string kg_in, kg_out;
  build_kg->add_option("tsv", kg_in, "triplet file")->required();
  build_kg->add_option("--out", kg_out, "write the normalized TSV here");

  // gen-synth
  auto* gen = app.add_subcommand("gen-synth", "generate a synthetic KG and dataset");
  std::string synth_spec_path, synth_outdir;
  gen->add_option("spec", synth_spec_path, "synthesis spec JSON")->required();
  gen->add_option("outdir", synth_outdir, "output directory")->required();

  // pretrain-attn
  auto* pre = app.add_subcommand("pretrain-attn", "stage-I KG-attention training");
  std::string pre_data, pre_kg, pre_cfg, pre_out = "stage1.ckpt";
  pre->add_option("data", pre_data)->required();
  pre->add_option("kg", pre_kg)->required();
  pre->add_option("cfg", pre_cfg)->required();
  pre->add_option("--out", pre_out, "checkpoint path");

  // train
  auto* train_cmd = app.add_subcommand("train", "stage-II end-to-end training");
  std::string tr_data, tr_kg, tr_cfg, tr_from, tr_out = "model.ckpt";
  train_cmd->add_option("data", tr_data)->required();
  train_cmd->add_option("kg", tr_kg)->required();
  train_cmd->add_option("cfg", tr_cfg)->required();
  train_cmd->add_option("--from", tr_from, "stage-I checkpoint")->required();
  train_cmd->add_option("--out", tr_out, "checkpoint path");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string ev_data, ev_kg, ev_ckpt, ev_cfg, ev_out;
  eval_cmd->add_option("data", ev_data)->required();
  eval_cmd->add_option("kg", ev_kg)->required();
  eval_cmd->add_option("ckpt", ev_ckpt)->required();
  eval_cmd->add_option("--cfg", ev_cfg, "config JSON (defaults to checkpoint-compatible defaults)");
  eval_cmd->add_option("--out", ev_out, "write metrics JSON here");

  // extract-subgraph
  auto* extract = app.add_subcommand("extract-subgraph",
                                     "dump candidates, scores and the subgraph for one example");
  std::string ex_example, ex_kg, ex_ckpt, ex_cfg, ex_out;
  extract->add_option("example", ex_example, "single example JSON file")->required();
  extract->add_option("kg", ex_kg)->required();
  extract->add_option("ckpt", ex_ckpt)->required();
  extract->add_option("--cfg", ex_cfg, "config JSON");
  extract->add_option("--out", ex_out, "write the dump here");

  // run-experiment
  auto* run = app.add_subcommand("run-experiment",
                                 "gen/load data, run both stages, evaluate");
  std::string run_cfg, run_out;
  run->add_option("config", run_cfg, "experiment config JSON")->required();
  run->add_option("--out", run_out, "override out_dir");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*build_kg) {
      KnowledgeGraph kg = KnowledgeGraph::load(kg_in);
      nlohmann::json stats = {{"concepts", kg.concepts().size()},
                              {"relations", kg.relations().size()},
                              {"triplets", kg.triplets().size()}};
      std::cout << stats.dump(2) << "\n";
      if (!kg_out.empty()) kg.save_tsv(kg_out);
      return 0;
    }

    if (*gen) {
      std::ifstream in(synth_spec_path);
      if (!in) throw std::runtime_error("cannot open spec " + synth_spec_path);
      nlohmann::json j;
      in >> j;
      SynthSpec spec = SynthSpec::from_json(j);
      if (seed) spec.seed = *seed;
      SynthData data = gen_synthetic(spec);
      fs::create_directories(synth_outdir);
      data.kg.save_tsv(synth_outdir + "/kg.tsv");
      save_dataset(synth_outdir + "/train.jsonl", data.train);
      save_dataset(synth_outdir + "/dev.jsonl", data.dev);
      save_dataset(synth_outdir + "/test.jsonl", data.test);
      std::cout << "wrote " << data.train.size() << " train / " << data.dev.size()
                << " dev / " << data.test.size() << " test examples and "
                << data.kg.triplets().size() << " triplets to " << synth_outdir
                << "\n";
      return 0;
    }

    if (*pre) {
      Config cfg = load_config_with_overrides(pre_cfg, preset, seed);
      KnowledgeGraph kg = KnowledgeGraph::load(pre_kg);
      std::vector<Example> data = load_dataset(pre_data);
      Vocabulary vocab = build_train_vocab(kg, data);
      Rng rng(cfg.train.seed);
      MrrgModel model =
          MrrgModel::init(cfg.model, vocab.size(), kg.relations().size(), rng);
      StageLog log = train_stage1(data, kg, vocab, model, cfg.train);
      print_stage_log("stage1", log);
      save_checkpoint(pre_out, model.named_parameters());
      vocab.save(pre_out + ".vocab");
      std::cout << "saved " << pre_out << "\n";
      return 0;
    }

    if (*train_cmd) {
      Config cfg = load_config_with_overrides(tr_cfg, preset, seed);
      KnowledgeGraph kg = KnowledgeGraph::load(tr_kg);
      std::vector<Example> data = load_dataset(tr_data);
      Vocabulary vocab = vocab_for(tr_from);
      MrrgModel model = model_from_checkpoint(tr_from, cfg, vocab, kg);
      StageLog log = train_stage2(data, kg, vocab, model, cfg.train);
      print_stage_log("stage2", log);
      save_checkpoint(tr_out, model.named_parameters());
      vocab.save(tr_out + ".vocab");
      std::cout << "saved " << tr_out << "\n";
      return 0;
    }

    if (*eval_cmd) {
      Config cfg;
      if (!ev_cfg.empty()) cfg = load_config_with_overrides(ev_cfg, preset, seed);
      KnowledgeGraph kg = KnowledgeGraph::load(ev_kg);
      std::vector<Example> data = load_dataset(ev_data);
      Vocabulary vocab = vocab_for(ev_ckpt);
      MrrgModel model = model_from_checkpoint(ev_ckpt, cfg, vocab, kg);
      Metrics metrics = evaluate(data, kg, vocab, model);
      nlohmann::json j = metrics_to_json(metrics);
      std::cout << j.dump(2) << "\n";
      if (!ev_out.empty()) write_json_file(ev_out, j);
      return 0;
    }

    if (*extract) {
      Config cfg;
      if (!ex_cfg.empty()) cfg = load_config_with_overrides(ex_cfg, preset, seed);
      KnowledgeGraph kg = KnowledgeGraph::load(ex_kg);
      std::ifstream in(ex_example);
      if (!in) throw std::runtime_error("cannot open example " + ex_example);
      nlohmann::json j;
      in >> j;
      Example ex = example_from_json(j, ex_example);
      Vocabulary vocab = vocab_for(ex_ckpt);
      MrrgModel model = model_from_checkpoint(ex_ckpt, cfg, vocab, kg);
      nlohmann::json dump = selection_dump(ex, kg, model, vocab);
      std::cout << dump.dump(2) << "\n";
      if (!ex_out.empty()) write_json_file(ex_out, dump);
      return 0;
    }

    if (*run) {
      ExperimentConfig ec = ExperimentConfig::load(run_cfg);
      if (!run_out.empty()) ec.out_dir = run_out;
      if (seed) {
        ec.stage1.seed = *seed;
        ec.stage2.seed = *seed;
        if (ec.synth) ec.synth->seed = *seed;
      }
      try {
        ExperimentResult r = run_experiment(ec);
        print_stage_log("stage1", r.stage1_log);
        print_stage_log("stage2", r.stage2_log);
        std::cout << metrics_to_json(r.metrics).dump(2) << "\n";
        std::cout << "metrics written to " << r.metrics_path << "\n";
      } catch (const StageError& e) {
        std::cerr << "stage " << e.stage << " failed: " << e.what() << "\n";
        return 2;
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
