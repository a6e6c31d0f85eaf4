#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mrrg/kg_attention.hpp"

using namespace mrrg;

namespace {

Tensor vec(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor::from({n}, std::move(v));
}

// context encoding with fixed contents, d-wide
ContextEncoding fixed_ctx(std::size_t d, double fill = 0.0) {
  ContextEncoding ctx;
  ctx.e_cls = Tensor::zeros({d});
  for (double& v : ctx.e_cls.values()) v = fill;
  ctx.e_q = Tensor::zeros({2, d});
  ctx.e_c = Tensor::zeros({3, d});
  return ctx;
}

TripletEncoding enc_with_in(std::size_t d, double first_coord) {
  TripletEncoding e;
  e.e_in = Tensor::zeros({d});
  e.e_in.values()[0] = first_coord;
  e.e_r = Tensor::zeros({d});
  e.e_out = Tensor::zeros({d});
  return e;
}

AttentionParams zeroed_params(std::size_t d, std::size_t k, Rng& rng) {
  AttentionParams p = AttentionParams::init(d, k, 3, rng);
  auto zero = [](DenseLayer& l) {
    std::fill(l.w.values().begin(), l.w.values().end(), 0.0);
    std::fill(l.b.values().begin(), l.b.values().end(), 0.0);
  };
  zero(p.score_hidden);
  zero(p.score_out);
  zero(p.f_in);
  zero(p.f_out);
  return p;
}

}  // namespace

TEST_CASE("score_triplets softmax basics", "[attention]") {
  Rng rng(3);
  const std::size_t d = 4;
  AttentionParams params = zeroed_params(d, 8, rng);
  ContextEncoding ctx = fixed_ctx(d);

  SECTION("singleton candidate scores 1") {
    Tape tape;
    Tensor cts = score_triplets(tape, ctx, {enc_with_in(d, 0.7)}, params);
    REQUIRE(cts.numel() == 1);
    CHECK(cts.values()[0] == 1.0);
  }
  SECTION("all-zero weights give uniform scores") {
    Tape tape;
    std::vector<TripletEncoding> cands = {enc_with_in(d, 1), enc_with_in(d, 2),
                                          enc_with_in(d, 3), enc_with_in(d, 4)};
    Tensor cts = score_triplets(tape, ctx, cands, params);
    for (double v : cts.values()) CHECK(v == Catch::Approx(0.25).margin(1e-15));
  }
  SECTION("planted linear scorer reproduces closed-form softmax") {
    // hidden passes through e_in[0]; output reads hidden[0]; logits become
    // [0, ln2, ln4] so cts must be [1/7, 2/7, 4/7]
    AttentionParams p = zeroed_params(d, 8, rng);
    p.score_hidden.act = DenseLayer::Act::none;
    p.score_hidden.w.values()[0 * 4 * d + d + 0] = 1.0;  // row 0 reads E_z[d]
    p.score_out.w.values()[0] = 1.0;
    std::vector<TripletEncoding> cands = {enc_with_in(d, 0.0),
                                          enc_with_in(d, std::log(2.0)),
                                          enc_with_in(d, std::log(4.0))};
    Tape tape;
    Tensor cts = score_triplets(tape, fixed_ctx(d), cands, p);
    CHECK(cts.values()[0] == Catch::Approx(1.0 / 7).margin(1e-12));
    CHECK(cts.values()[1] == Catch::Approx(2.0 / 7).margin(1e-12));
    CHECK(cts.values()[2] == Catch::Approx(4.0 / 7).margin(1e-12));
  }
  SECTION("empty candidate list rejected") {
    Tape tape;
    CHECK_THROWS_AS(score_triplets(tape, ctx, {}, params), std::invalid_argument);
  }
}

TEST_CASE("cts scores sum to one for random candidate sets", "[attention]") {
  Rng rng(31);
  const std::size_t d = 6;
  AttentionParams params = AttentionParams::init(d, 50, 3, rng);
  ContextEncoding ctx = fixed_ctx(d, 0.3);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t m = 1 + rng.index(50);
    std::vector<TripletEncoding> cands;
    for (std::size_t i = 0; i < m; ++i) {
      TripletEncoding e;
      e.e_in = Tensor::zeros({d});
      e.e_r = Tensor::zeros({d});
      e.e_out = Tensor::zeros({d});
      for (double& v : e.e_in.values()) v = rng.uniform(-3, 3);
      for (double& v : e.e_r.values()) v = rng.uniform(-3, 3);
      for (double& v : e.e_out.values()) v = rng.uniform(-3, 3);
      cands.push_back(e);
    }
    Tape tape;
    Tensor cts = score_triplets(tape, ctx, cands, params);
    double sum = 0.0;
    for (double v : cts.values()) sum += v;
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("select_top_k ordering, ties and stability", "[attention]") {
  SECTION("k covers everything") {
    auto sel = select_top_k({0.2, 0.5, 0.3}, 10);
    REQUIRE(sel.size() == 3);
    CHECK(sel[0].first == 1);
    CHECK(sel[1].first == 2);
    CHECK(sel[2].first == 0);
  }
  SECTION("descending selection") {
    auto sel = select_top_k({0.5, 0.3, 0.2}, 2);
    REQUIRE(sel.size() == 2);
    CHECK(sel[0].first == 0);
    CHECK(sel[1].first == 1);
  }
  SECTION("ties break by index") {
    auto sel = select_top_k({0.25, 0.25, 0.25, 0.25}, 2);
    REQUIRE(sel.size() == 2);
    CHECK(sel[0].first == 0);
    CHECK(sel[1].first == 1);
  }
  SECTION("appending a below-threshold candidate changes nothing") {
    std::vector<double> scores = {0.4, 0.3, 0.2, 0.1};
    auto before = select_top_k(scores, 2);
    scores.push_back(0.05);
    auto after = select_top_k(scores, 2);
    REQUIRE(before.size() == after.size());
    for (std::size_t i = 0; i < before.size(); ++i)
      CHECK(before[i].first == after[i].first);
  }
  SECTION("raising one logit above all others guarantees selection") {
    Rng rng(17);
    for (int trial = 0; trial < 30; ++trial) {
      std::vector<double> logits(6);
      for (double& v : logits) v = rng.uniform(-2, 2);
      std::size_t chosen = rng.index(6);
      double mx = *std::max_element(logits.begin(), logits.end());
      logits[chosen] = mx + 1.0;
      double shift = rng.uniform(-5, 5);
      std::vector<double> p(6);
      double sum = 0;
      for (std::size_t i = 0; i < 6; ++i) sum += std::exp(logits[i] + shift);
      for (std::size_t i = 0; i < 6; ++i) p[i] = std::exp(logits[i] + shift) / sum;
      auto sel = select_top_k(p, 1);
      REQUIRE(sel.size() == 1);
      CHECK(sel[0].first == chosen);
    }
  }
}

TEST_CASE("reweight planted fixtures", "[attention]") {
  Rng rng(7);
  const std::size_t d = 3;

  SECTION("zero cts and zero biases give zero vectors") {
    AttentionParams p = zeroed_params(d, 4, rng);
    TripletEncoding e;
    e.e_in = vec({1, 2, 3});
    e.e_r = vec({4, 5, 6});
    e.e_out = vec({7, 8, 9});
    Tape tape;
    auto [in_p, out_p] = reweight(tape, e, Tensor::scalar(0.0), p);
    for (double v : in_p.values()) CHECK(v == 0.0);
    for (double v : out_p.values()) CHECK(v == 0.0);
  }
  SECTION("identity-on-first-half f_in with cts=1 returns e_in") {
    AttentionParams p = zeroed_params(d, 4, rng);
    p.f_in.act = DenseLayer::Act::none;
    for (std::size_t i = 0; i < d; ++i) p.f_in.w.values()[i * 2 * d + i] = 1.0;
    TripletEncoding e;
    e.e_in = vec({0.5, -0.25, 2.0});
    e.e_r = vec({9, 9, 9});
    e.e_out = vec({0, 0, 0});
    Tape tape;
    auto [in_p, out_p] = reweight(tape, e, Tensor::scalar(1.0), p);
    CHECK(in_p.values() == e.e_in.values());
  }
  SECTION("doubling cts doubles a linear reweighting") {
    AttentionParams p = AttentionParams::init(d, 4, 3, rng);
    p.f_in.act = DenseLayer::Act::none;
    std::fill(p.f_in.b.values().begin(), p.f_in.b.values().end(), 0.0);
    TripletEncoding e;
    e.e_in = vec({0.5, -0.25, 2.0});
    e.e_r = vec({1, 2, -1});
    e.e_out = vec({0, 0, 0});
    Tape tape;
    auto [one, unused1] = reweight(tape, e, Tensor::scalar(1.0), p);
    auto [two, unused2] = reweight(tape, e, Tensor::scalar(2.0), p);
    for (std::size_t i = 0; i < d; ++i)
      CHECK(two.values()[i] == Catch::Approx(2.0 * one.values()[i]).margin(1e-12));
  }
}

TEST_CASE("stage1_logits shape, padding and determinism", "[attention]") {
  Rng rng(23);
  const std::size_t d = 4, k = 3;
  AttentionParams params = AttentionParams::init(d, k, 3, rng);
  ContextEncoding ctx = fixed_ctx(d, 0.2);

  SECTION("zero selected triplets still yields finite logits") {
    Tape tape;
    Tensor logits = stage1_logits(tape, ctx, {}, params);
    CHECK(logits.shape() == Shape{3});
    CHECK(logits.all_finite());
  }
  SECTION("logit length equals label count") {
    Rng rng2(29);
    AttentionParams p5 = AttentionParams::init(d, k, 5, rng2);
    Tape tape;
    CHECK(stage1_logits(tape, ctx, {}, p5).numel() == 5);
  }
  SECTION("same inputs give identical logits") {
    ScoredTriplet st;
    st.cts = Tensor::scalar(0.5);
    st.cts_value = 0.5;
    st.e_in_prime = vec({1, 2, 3, 4});
    st.e_out_prime = vec({4, 3, 2, 1});
    st.e_r = vec({0, 0, 0, 0});
    Tape t1, t2;
    Tensor a = stage1_logits(t1, ctx, {st}, params);
    Tensor b = stage1_logits(t2, ctx, {st}, params);
    CHECK(a.values() == b.values());
  }
  SECTION("more than k triplets rejected") {
    std::vector<ScoredTriplet> too_many(k + 1);
    for (auto& st : too_many) {
      st.e_in_prime = Tensor::zeros({d});
      st.e_out_prime = Tensor::zeros({d});
    }
    Tape tape;
    CHECK_THROWS_AS(stage1_logits(tape, ctx, too_many, params),
                    std::invalid_argument);
  }
}

TEST_CASE("gradients flow through score, reweight and stage-1 head", "[attention]") {
  Rng rng(41);
  const std::size_t d = 3, k = 2;
  AttentionParams params = AttentionParams::init(d, k, 3, rng);

  ContextEncoding ctx;
  ctx.e_cls = vec({0.1, -0.2, 0.3});
  ctx.e_q = Tensor::from({2, 3}, {0.5, 0.1, -0.1, 0.2, 0.0, 0.4});
  ctx.e_c = Tensor::from({2, 3}, {-0.3, 0.2, 0.1, 0.6, -0.5, 0.2});

  std::vector<Triplet> cands = {Triplet{0, 0, 1}, Triplet{1, 0, 2}, Triplet{2, 0, 0}};
  std::vector<TripletEncoding> encs;
  Rng data_rng(43);
  for (std::size_t i = 0; i < cands.size(); ++i) {
    TripletEncoding e;
    e.e_in = Tensor::zeros({d});
    e.e_r = Tensor::zeros({d});
    e.e_out = Tensor::zeros({d});
    for (double& v : e.e_in.values()) v = data_rng.uniform(-1, 1);
    for (double& v : e.e_r.values()) v = data_rng.uniform(-1, 1);
    for (double& v : e.e_out.values()) v = data_rng.uniform(-1, 1);
    encs.push_back(e);
  }

  auto f = [&](Tape& t) {
    auto selected = select_and_reweight(t, ctx, cands, encs, params);
    Tensor logits = stage1_logits(t, ctx, selected, params);
    return cross_entropy(t, logits, 1);
  };
  std::vector<std::pair<std::string, Tensor>> params_list;
  params.collect_params("attn", params_list);
  GradCheckReport rep = grad_check(f, params_list, 1e-5);
  CAPTURE(rep.worst_param, rep.worst_index, rep.worst_analytic, rep.worst_numeric);
  CHECK(rep.max_rel_error < 1e-4);
}
