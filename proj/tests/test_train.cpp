#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mrrg/synth.hpp"
#include "mrrg/train.hpp"

using namespace mrrg;

namespace {

SynthSpec tiny_spec(std::uint64_t seed = 17) {
  SynthSpec spec;
  spec.seed = seed;
  spec.concepts = 64;
  spec.relations = 4;
  spec.vocabulary = 12;
  spec.hop1_fraction = 0.5;
  spec.train = {7, 8, 5};
  spec.test = {3, 4, 2};
  return spec;
}

struct Fixture {
  SynthData data;
  Vocabulary vocab;
  ModelConfig cfg;

  explicit Fixture(std::size_t d = 8, std::size_t g = 8, std::size_t hops = 2)
      : data(gen_synthetic(tiny_spec())) {
    std::vector<std::vector<std::string>> texts;
    for (const Example& e : data.train) {
      texts.push_back(e.question_tokens());
      texts.push_back(e.paragraph_tokens());
    }
    for (const Example& e : data.test) {
      texts.push_back(e.question_tokens());
      texts.push_back(e.paragraph_tokens());
    }
    vocab = Vocabulary::build(data.kg, texts);
    cfg.d = d;
    cfg.g = g;
    cfg.hops = hops;
    cfg.top_k = 12;
  }

  MrrgModel model(std::uint64_t seed) const {
    Rng rng(seed);
    return MrrgModel::init(cfg, vocab.size(), data.kg.relations().size(), rng);
  }
};

std::vector<double> snapshot(const std::vector<std::pair<std::string, Tensor>>& params) {
  std::vector<double> out;
  for (const auto& [name, p] : params)
    out.insert(out.end(), p.values().begin(), p.values().end());
  return out;
}

}  // namespace

TEST_CASE("stage-1 bookkeeping counts optimizer steps", "[train]") {
  Fixture fx;
  std::vector<Example> ten(fx.data.train.begin(), fx.data.train.begin() + 10);
  MrrgModel model = fx.model(3);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 2;
  cfg.seed = 1;
  StageLog log = train_stage1(ten, fx.data.kg, fx.vocab, model, cfg);
  REQUIRE(log.epochs.size() == 1);
  CHECK(log.epochs[0].optimizer_steps == 5);  // 10 examples / batch 2
  CHECK(log.total_steps == 5);
}

TEST_CASE("stage-1 memorizes a small fixture", "[train]") {
  Fixture fx;
  MrrgModel model = fx.model(5);
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.batch_size = 4;
  cfg.lr = 1e-2;
  cfg.seed = 2;
  cfg.stop_train_accuracy = 1.0;
  StageLog log = train_stage1(fx.data.train, fx.data.kg, fx.vocab, model, cfg);
  REQUIRE_FALSE(log.epochs.empty());
  CHECK(log.epochs.back().accuracy == 1.0);
  CHECK(log.epochs.back().mean_loss < log.epochs.front().mean_loss);
}

TEST_CASE("stage-1 training is bit-deterministic", "[train]") {
  Fixture fx;
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  cfg.seed = 11;

  MrrgModel m1 = fx.model(7);
  MrrgModel m2 = fx.model(7);
  train_stage1(fx.data.train, fx.data.kg, fx.vocab, m1, cfg);
  train_stage1(fx.data.train, fx.data.kg, fx.vocab, m2, cfg);
  CHECK(snapshot(m1.named_parameters()) == snapshot(m2.named_parameters()));
}

TEST_CASE("stage-2 freeze keeps every scorer parameter bit-unchanged", "[train]") {
  Fixture fx;
  MrrgModel model = fx.model(9);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.seed = 3;
  cfg.freeze_attention = true;
  std::vector<double> before = snapshot(model.scorer_parameters());
  std::vector<double> head_before = snapshot([&] {
    std::vector<std::pair<std::string, Tensor>> out;
    model.attention.head1.collect_params("h1", out);
    return out;
  }());
  train_stage2(fx.data.train, fx.data.kg, fx.vocab, model, cfg);
  CHECK(snapshot(model.scorer_parameters()) == before);
  // the stage-1 head is not part of the stage-2 graph either
  CHECK(snapshot([&] {
          std::vector<std::pair<std::string, Tensor>> out;
          model.attention.head1.collect_params("h1", out);
          return out;
        }()) == head_before);
}

TEST_CASE("unfrozen scorer parameters move in stage 2", "[train]") {
  Fixture fx;
  MrrgModel model = fx.model(13);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.seed = 4;
  cfg.freeze_attention = false;
  std::vector<double> before = snapshot(model.scorer_parameters());
  train_stage2(fx.data.train, fx.data.kg, fx.vocab, model, cfg);
  CHECK(snapshot(model.scorer_parameters()) != before);
}

TEST_CASE("stage-2 training is bit-deterministic", "[train]") {
  Fixture fx;
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.seed = 21;

  MrrgModel m1 = fx.model(15);
  MrrgModel m2 = fx.model(15);
  train_stage2(fx.data.train, fx.data.kg, fx.vocab, m1, cfg);
  train_stage2(fx.data.train, fx.data.kg, fx.vocab, m2, cfg);
  CHECK(snapshot(m1.named_parameters()) == snapshot(m2.named_parameters()));
}

TEST_CASE("stage-2 memorizes a small fixture", "[train]") {
  Fixture fx(10, 8, 2);
  MrrgModel model = fx.model(17);
  TrainConfig cfg;
  cfg.epochs = 80;
  cfg.batch_size = 4;
  cfg.lr = 5e-3;
  cfg.seed = 5;
  cfg.stop_train_accuracy = 1.0;
  StageLog log = train_stage2(fx.data.train, fx.data.kg, fx.vocab, model, cfg);
  CHECK(log.epochs.back().accuracy == 1.0);
}

TEST_CASE("evaluate bookkeeping on a constant predictor", "[train]") {
  Fixture fx;
  MrrgModel model = fx.model(19);
  // zero the answer head and plant a bias: the model always answers "less"
  std::fill(model.answer1.w.values().begin(), model.answer1.w.values().end(), 0.0);
  std::fill(model.answer1.b.values().begin(), model.answer1.b.values().end(), 0.0);
  std::fill(model.answer2.w.values().begin(), model.answer2.w.values().end(), 0.0);
  model.answer2.b.values() = {0.0, 5.0, 0.0};

  Metrics m = evaluate(fx.data.train, fx.data.kg, fx.vocab, model);
  std::size_t less_count = 0;
  for (const Example& e : fx.data.train)
    if (e.label == Label::less) ++less_count;
  CHECK(m.total == fx.data.train.size());
  CHECK(m.overall == Catch::Approx(static_cast<double>(less_count) /
                                   static_cast<double>(m.total)));
  // per-category counts partition the dataset
  CHECK(m.category_total[0] + m.category_total[1] + m.category_total[2] == m.total);
  // confusion: every prediction lands in the "less" column
  for (std::size_t g = 0; g < 3; ++g) {
    CHECK(m.confusion[g][0] == 0);
    CHECK(m.confusion[g][2] == 0);
  }

  nlohmann::json j = metrics_to_json(m);
  CHECK(j.contains("overall"));
  CHECK(j["per_category"].contains("in_para"));
  CHECK(j["per_category"].contains("out_of_para"));
  CHECK(j["per_category"].contains("no_effect"));
  CHECK(j["per_hop"].contains("1"));
  CHECK(j["per_hop"].contains("2"));
  CHECK(j["confusion"].size() == 3);
}

TEST_CASE("perfect and chance evaluation extremes", "[train]") {
  Fixture fx;
  // gold-replaying predictor: evaluate against a dataset of one label and a
  // constant model planted to that label
  MrrgModel model = fx.model(23);
  std::fill(model.answer1.w.values().begin(), model.answer1.w.values().end(), 0.0);
  std::fill(model.answer1.b.values().begin(), model.answer1.b.values().end(), 0.0);
  std::fill(model.answer2.w.values().begin(), model.answer2.w.values().end(), 0.0);
  model.answer2.b.values() = {0.0, 0.0, 5.0};

  std::vector<Example> only_ne;
  for (const Example& e : fx.data.train)
    if (e.label == Label::no_effect) only_ne.push_back(e);
  REQUIRE_FALSE(only_ne.empty());
  Metrics m = evaluate(only_ne, fx.data.kg, fx.vocab, model);
  CHECK(m.overall == 1.0);
  CHECK(category_accuracy(m, Category::no_effect) == 1.0);
}
