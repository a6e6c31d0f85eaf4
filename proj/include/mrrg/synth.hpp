#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mrrg/dataset.hpp"
#include "mrrg/kg.hpp"
#include "mrrg/rng.hpp"

namespace mrrg {

struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SynthCategoryCounts {
  std::size_t in_para = 0;
  std::size_t out_of_para = 0;
  std::size_t no_effect = 0;

  std::size_t total() const { return in_para + out_of_para + no_effect; }
};

// Desk-scale stand-in for the benchmark: procedural-sounding paragraphs over
// generated concepts, with out-of-para answers decided by planted relation
// chains that never appear in the text.
struct SynthSpec {
  std::uint64_t seed = 7;
  std::size_t concepts = 200;
  std::size_t relations = 4;
  std::size_t triplets = 0;  // 0 = structural minimum, else pad with neutral edges
  std::size_t vocabulary = 40;
  double hop1_fraction = 0.5;  // planted path length distribution over {1,2}
  SynthCategoryCounts train, dev, test;

  static SynthSpec from_json(const nlohmann::json& j) {
    SynthSpec s;
    s.seed = j.value("seed", s.seed);
    s.concepts = j.value("concepts", s.concepts);
    s.relations = j.value("relations", s.relations);
    s.triplets = j.value("triplets", s.triplets);
    s.vocabulary = j.value("vocabulary", s.vocabulary);
    if (j.contains("path_hops")) {
      const auto& ph = j.at("path_hops");
      double h1 = ph.value("1", 0.5);
      double h2 = ph.value("2", 0.5);
      if (h1 < 0 || h2 < 0 || h1 + h2 <= 0)
        throw GenerationError("path_hops fractions must be non-negative and sum > 0");
      s.hop1_fraction = h1 / (h1 + h2);
    }
    auto counts = [](const nlohmann::json& cj) {
      SynthCategoryCounts c;
      c.in_para = cj.value("in_para", std::size_t{0});
      c.out_of_para = cj.value("out_of_para", std::size_t{0});
      c.no_effect = cj.value("no_effect", std::size_t{0});
      return c;
    };
    if (j.contains("splits")) {
      const auto& sp = j.at("splits");
      if (sp.contains("train")) s.train = counts(sp.at("train"));
      if (sp.contains("dev")) s.dev = counts(sp.at("dev"));
      if (sp.contains("test")) s.test = counts(sp.at("test"));
    }
    return s;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["concepts"] = concepts;
    j["relations"] = relations;
    j["triplets"] = triplets;
    j["vocabulary"] = vocabulary;
    j["path_hops"] = {{"1", hop1_fraction}, {"2", 1.0 - hop1_fraction}};
    auto counts = [](const SynthCategoryCounts& c) {
      return nlohmann::json{{"in_para", c.in_para},
                            {"out_of_para", c.out_of_para},
                            {"no_effect", c.no_effect}};
    };
    j["splits"] = {{"train", counts(train)}, {"dev", counts(dev)}, {"test", counts(test)}};
    return j;
  }
};

struct SynthData {
  KnowledgeGraph kg;
  std::vector<Example> train, dev, test;
};

namespace synth_detail {

inline std::string make_word(Rng& rng, std::size_t syllables) {
  static const char consonants[] = "bdfgklmnprstvz";
  static const char vowels[] = "aeiou";
  std::string w;
  for (std::size_t s = 0; s < syllables; ++s) {
    w += consonants[rng.index(sizeof(consonants) - 1)];
    w += vowels[rng.index(sizeof(vowels) - 1)];
  }
  return w;
}

inline std::vector<std::string> unique_words(Rng& rng, std::size_t count,
                                             std::set<std::string>& taken,
                                             std::size_t syllables) {
  std::vector<std::string> out;
  std::size_t guard = 0;
  while (out.size() < count) {
    if (++guard > count * 200 + 1000)
      throw GenerationError("could not generate enough unique words");
    std::string w = make_word(rng, syllables);
    if (taken.count(w)) continue;
    taken.insert(w);
    out.push_back(w);
  }
  return out;
}

struct Chain {
  std::string x;
  std::vector<std::pair<std::string, std::string>> hops;  // (relation, target)
  Label label = Label::more;
  int length = 1;

  const std::string& y() const { return hops.back().second; }
};

struct World {
  std::vector<std::string> x_out_train_1, x_out_train_2, x_out_eval_1, x_out_eval_2;
  std::vector<std::string> x_in, x_ne;
  std::vector<std::string> p_plain, decoy_amp, decoy_dim;
  std::map<std::string, Chain> chain_of;  // by cause concept
  std::vector<std::string> fillers;
  KnowledgeGraph kg;
};

// fixed template scaffolding; everything else is generated
inline const std::vector<std::string>& function_words() {
  static const std::vector<std::string> words = {
      "suppose", "happens", ",",        "how",    "will",   "it",    "affect", "?",
      ".",       "the",     "process",  "begins", "when",   "appears", "then",
      "turns",   "into",    "settles",  "near",   "finally", "forms", "slowly",
      "later",   "spreads", "gathers",  "around", "moves",  "continues",
      "boosts",  "reduces"};
  return words;
}

inline World build_world(const SynthSpec& spec, Rng& rng) {
  if (spec.relations < 3)
    throw GenerationError("need at least 3 relations (two polarities plus a neutral)");

  const std::size_t n_x_out = std::max<std::size_t>(8, spec.concepts / 4);
  const std::size_t n_2hop =
      static_cast<std::size_t>(static_cast<double>(n_x_out) * (1.0 - spec.hop1_fraction) + 0.5);
  const std::size_t n_1hop = n_x_out - n_2hop;
  const std::size_t n_z = n_2hop;
  const std::size_t n_x_in = std::max<std::size_t>(2, spec.concepts / 10);
  const std::size_t n_x_ne = std::max<std::size_t>(2, spec.concepts / 20);
  const std::size_t n_v = std::max<std::size_t>(4, spec.concepts / 10);
  const std::size_t used = n_x_out + n_z + n_x_in + n_x_ne + n_v;
  if (used + 12 > spec.concepts)
    throw GenerationError("concept budget too small: need at least " +
                          std::to_string(used + 12) + ", have " +
                          std::to_string(spec.concepts));
  const std::size_t n_p = spec.concepts - used;

  std::set<std::string> taken(function_words().begin(), function_words().end());
  std::vector<std::string> x_out = unique_words(rng, n_x_out, taken, 3);
  std::vector<std::string> z_pool = unique_words(rng, n_z, taken, 3);
  std::vector<std::string> x_in = unique_words(rng, n_x_in, taken, 3);
  std::vector<std::string> x_ne = unique_words(rng, n_x_ne, taken, 3);
  std::vector<std::string> v_pool = unique_words(rng, n_v, taken, 3);
  std::vector<std::string> p_pool = unique_words(rng, n_p, taken, 3);
  std::vector<std::string> fillers = unique_words(rng, spec.vocabulary, taken, 2);

  std::size_t n_decoy = std::min<std::size_t>(n_p / 3, 24);
  n_decoy -= n_decoy % 2;
  if (n_decoy < 4)
    throw GenerationError("paragraph pool too small to host decoy polarity edges");

  World w;
  w.fillers = std::move(fillers);
  w.x_in = std::move(x_in);
  w.x_ne = std::move(x_ne);
  for (std::size_t i = 0; i < n_decoy / 2; ++i) w.decoy_amp.push_back(p_pool[i]);
  for (std::size_t i = n_decoy / 2; i < n_decoy; ++i) w.decoy_dim.push_back(p_pool[i]);
  for (std::size_t i = n_decoy; i < p_pool.size(); ++i) w.p_plain.push_back(p_pool[i]);
  if (w.p_plain.size() < 4)
    throw GenerationError("not enough plain paragraph concepts");

  // relation names: two polarities, the rest neutral
  std::vector<std::string> rel_names = {"amplifies", "diminishes", "relatedto"};
  if (spec.relations >= 4) rel_names.push_back("partof");
  for (std::size_t r = rel_names.size(); r < spec.relations; ++r)
    rel_names.push_back("rel" + std::to_string(r));
  std::vector<std::string> neutral(rel_names.begin() + 2, rel_names.end());

  KgBuilder builder;
  std::size_t v_cursor = 0;
  std::size_t neutral_cursor = 0;
  auto next_v = [&]() -> const std::string& { return v_pool[v_cursor++ % v_pool.size()]; };
  auto next_neutral = [&]() -> const std::string& {
    return neutral[neutral_cursor++ % neutral.size()];
  };

  // plant one chain per out-of-para cause; polarities cycle so labels
  // balance within every sub-pool
  const char* kAmp = "amplifies";
  const char* kDim = "diminishes";
  std::size_t plain_cursor = 0;
  auto next_plain_y = [&]() -> const std::string& {
    return w.p_plain[plain_cursor++ % w.p_plain.size()];
  };

  std::size_t hop1_seen = 0, hop2_seen = 0;
  for (std::size_t i = 0; i < x_out.size(); ++i) {
    const std::string& x = x_out[i];
    const bool two_hop = i >= n_1hop;
    Chain chain;
    chain.x = x;
    if (!two_hop) {
      const bool amp = (hop1_seen++ % 2) == 0;
      chain.length = 1;
      chain.hops.emplace_back(amp ? kAmp : kDim, next_plain_y());
      chain.label = amp ? Label::more : Label::less;
      builder.add(x, chain.hops[0].first, chain.hops[0].second);
    } else {
      const std::size_t combo = hop2_seen++ % 4;  // ++, +-, -+, --
      const bool p1 = combo == 0 || combo == 1;
      const bool p2 = combo == 0 || combo == 2;
      const std::string& z = z_pool.at(hop2_seen - 1);
      chain.length = 2;
      chain.hops.emplace_back(p1 ? kAmp : kDim, z);
      chain.hops.emplace_back(p2 ? kAmp : kDim, next_plain_y());
      chain.label = (p1 == p2) ? Label::more : Label::less;
      builder.add(x, chain.hops[0].first, z);
      builder.add(z, chain.hops[1].first, chain.hops[1].second);
    }
    w.chain_of[x] = chain;
    const bool train_x = (i % 10) < 7;  // 70/30 train vs held-out eval causes
    auto& bucket = two_hop ? (train_x ? w.x_out_train_2 : w.x_out_eval_2)
                           : (train_x ? w.x_out_train_1 : w.x_out_eval_1);
    bucket.push_back(x);
  }
  if (w.x_out_train_1.empty() && w.x_out_train_2.empty())
    throw GenerationError("no training causes generated");

  // retrievable but neutral edges for the remaining cause pools
  for (const std::string& x : w.x_in) builder.add(x, next_neutral(), next_v());
  for (const std::string& x : w.x_ne) builder.add(x, next_neutral(), next_v());

  // every paragraph concept heads one neutral edge, so it always becomes a
  // subgraph node; decoy heads add their polarity edge on top
  for (const std::string& p : p_pool) builder.add(p, next_neutral(), next_v());
  for (const std::string& d : w.decoy_amp) builder.add(d, kAmp, next_v());
  for (const std::string& d : w.decoy_dim) builder.add(d, kDim, next_v());

  if (spec.triplets > 0) {
    if (spec.triplets < builder.size())
      throw GenerationError("triplet target " + std::to_string(spec.triplets) +
                            " below the structural minimum " +
                            std::to_string(builder.size()));
    std::size_t guard = 0;
    while (builder.size() < spec.triplets) {
      if (++guard > spec.triplets * 50)
        throw GenerationError("cannot reach the requested triplet count");
      const std::string& h = w.p_plain[rng.index(w.p_plain.size())];
      const std::string& t = v_pool[rng.index(v_pool.size())];
      builder.add(h, neutral[rng.index(neutral.size())], t);
    }
  }

  w.kg = builder.build();
  return w;
}

struct ParagraphPlan {
  std::vector<std::string> sentences;
  std::set<std::string> mentioned;  // concepts placed in the text
};

inline ParagraphPlan make_paragraph(Rng& rng, const World& w, const std::string& y,
                                    const std::vector<std::string>& decoys,
                                    const std::string& cue_sentence) {
  // two plain distractors that are not the effect concept
  std::vector<std::string> mentions;
  std::size_t guard = 0;
  while (mentions.size() < 2) {
    if (++guard > 1000) throw GenerationError("distractor sampling stalled");
    const std::string& d = w.p_plain[rng.index(w.p_plain.size())];
    if (d == y) continue;
    if (std::find(mentions.begin(), mentions.end(), d) != mentions.end()) continue;
    mentions.push_back(d);
  }
  for (const std::string& d : decoys) mentions.push_back(d);
  mentions.push_back(y);
  rng.shuffle(mentions);

  ParagraphPlan plan;
  for (const std::string& m : mentions) plan.mentioned.insert(m);

  std::size_t i = 0;
  while (i < mentions.size()) {
    const bool pair_left = i + 1 < mentions.size();
    switch (pair_left ? rng.index(5) : rng.index(3)) {
      case 0:
        plan.sentences.push_back("the process begins when " + mentions[i] + " appears .");
        i += 1;
        break;
      case 1:
        plan.sentences.push_back("later " + mentions[i] + " spreads slowly .");
        i += 1;
        break;
      case 2:
        plan.sentences.push_back("then " + mentions[i] + " forms .");
        i += 1;
        break;
      case 3:
        plan.sentences.push_back(mentions[i] + " turns into " + mentions[i + 1] + " .");
        i += 2;
        break;
      default:
        plan.sentences.push_back(mentions[i] + " moves near " + mentions[i + 1] + " .");
        i += 2;
        break;
    }
  }
  const std::string& w1 = w.fillers[rng.index(w.fillers.size())];
  const std::string& w2 = w.fillers[rng.index(w.fillers.size())];
  plan.sentences.push_back("the " + w1 + " " + w2 + " continues .");
  rng.shuffle(plan.sentences);
  if (!cue_sentence.empty()) {
    std::size_t at = rng.index(plan.sentences.size() + 1);
    plan.sentences.insert(plan.sentences.begin() + at, cue_sentence);
  }
  return plan;
}

inline std::string make_question(const std::string& x, const std::string& y) {
  return "suppose " + x + " happens , how will it affect " + y + " ?";
}

// Brute-force soundness check over the KG, mirroring retrieval and
// augmentation: enumerate polarity-only paths (length <= 2) from the cause
// node to the effect node among the example's candidate-derived graph.
inline void validate_example(const Example& ex, const World& w,
                             const std::string& cause, const std::string& effect) {
  const KnowledgeGraph& kg = w.kg;
  RelationId amp = kg.find_relation("amplifies").value();
  RelationId dim = kg.find_relation("diminishes").value();
  auto is_polar = [&](RelationId r) { return r == amp || r == dim; };

  std::vector<std::string> tokens = ex.question_tokens();
  std::vector<std::string> ptoks = ex.paragraph_tokens();
  tokens.insert(tokens.end(), ptoks.begin(), ptoks.end());
  std::vector<ConceptId> entities = extract_entities(tokens, kg);
  std::vector<Triplet> cands = retrieve_candidates(entities, kg, 50);

  std::vector<ConceptId> nodes;
  std::set<ConceptId> node_set;
  auto add_node = [&](ConceptId c) {
    if (node_set.insert(c).second) nodes.push_back(c);
  };
  for (const Triplet& t : cands) {
    add_node(t.head);
    add_node(t.tail);
  }
  // candidate edges plus KG augmentation between included nodes
  std::set<std::tuple<ConceptId, RelationId, ConceptId>> edges;
  for (const Triplet& t : cands) edges.insert({t.head, t.rel, t.tail});
  for (ConceptId a : nodes)
    for (ConceptId b : nodes) {
      if (a == b) continue;
      if (auto r = kg.relation_between(a, b)) edges.insert({a, *r, b});
    }

  auto x_id = kg.find_concept(cause);
  auto y_id = kg.find_concept(effect);
  if (!x_id || !y_id) throw GenerationError(ex.id + ": cause or effect not in KG");

  std::vector<std::vector<std::pair<RelationId, ConceptId>>> polar_paths;
  for (const auto& [h1, r1, t1] : edges) {
    if (h1 != *x_id || !is_polar(r1)) continue;
    if (t1 == *y_id) polar_paths.push_back({{r1, t1}});
    for (const auto& [h2, r2, t2] : edges) {
      if (h2 != t1 || !is_polar(r2)) continue;
      if (t2 == *y_id) polar_paths.push_back({{r1, t1}, {r2, t2}});
    }
  }

  if (ex.category == Category::out_of_para) {
    if (polar_paths.size() != 1)
      throw GenerationError(ex.id + ": expected exactly one label-consistent chain, found " +
                            std::to_string(polar_paths.size()));
    const auto& path = polar_paths[0];
    const Chain& planted = w.chain_of.at(cause);
    if (path.size() != static_cast<std::size_t>(planted.length))
      throw GenerationError(ex.id + ": chain length mismatch");
    std::size_t flips = 0;
    for (const auto& [r, t] : path)
      if (r == dim) ++flips;
    Label derived = (flips % 2 == 0) ? Label::more : Label::less;
    if (derived != ex.label)
      throw GenerationError(ex.id + ": chain parity disagrees with the label");
    // the intermediate never leaks into the paragraph
    if (planted.length == 2) {
      const std::string& z = planted.hops[0].second;
      for (const std::string& tok : ptoks)
        if (tok == z) throw GenerationError(ex.id + ": intermediate appears in paragraph");
    }
  } else {
    if (!polar_paths.empty())
      throw GenerationError(ex.id + ": unexpected polarity chain for category " +
                            category_name(ex.category));
  }

  const bool x_in_para = [&] {
    for (const std::string& tok : ptoks)
      if (tok == cause) return true;
    return false;
  }();
  if (ex.category == Category::in_para && !x_in_para)
    throw GenerationError(ex.id + ": in-para cause missing from paragraph");
  if (ex.category != Category::in_para && x_in_para)
    throw GenerationError(ex.id + ": cause leaked into paragraph");
}

inline Example make_out_of_para(Rng& rng, const World& w, const std::string& x,
                                const std::string& id) {
  const Chain& chain = w.chain_of.at(x);
  std::vector<std::string> decoys;
  if (chain.length == 2) {
    // balance polarity-edge counts to (2, 2): chain provides some, decoys
    // the rest, so relation frequencies alone say nothing about the label
    std::size_t n_amp = 0, n_dim = 0;
    for (const auto& [r, t] : chain.hops) (r == "amplifies" ? n_amp : n_dim)++;
    auto pick = [&](const std::vector<std::string>& pool, std::size_t count) {
      std::set<std::size_t> chosen;
      std::size_t guard = 0;
      while (chosen.size() < count) {
        if (++guard > 1000) throw GenerationError("decoy sampling stalled");
        chosen.insert(rng.index(pool.size()));
      }
      for (std::size_t i : chosen) decoys.push_back(pool[i]);
    };
    pick(w.decoy_amp, 2 - n_amp);
    pick(w.decoy_dim, 2 - n_dim);
  }
  ParagraphPlan plan = make_paragraph(rng, w, chain.y(), decoys, "");
  Example ex;
  ex.id = id;
  ex.question = make_question(x, chain.y());
  ex.paragraph = plan.sentences;
  ex.label = chain.label;
  ex.category = Category::out_of_para;
  ex.hops = chain.length;
  return ex;
}

inline Example make_in_para(Rng& rng, const World& w, const std::string& x, bool more,
                            const std::string& id) {
  const std::string& y = w.p_plain[rng.index(w.p_plain.size())];
  std::string cue = x + (more ? " boosts " : " reduces ") + y + " .";
  ParagraphPlan plan = make_paragraph(rng, w, y, {}, cue);
  Example ex;
  ex.id = id;
  ex.question = make_question(x, y);
  ex.paragraph = plan.sentences;
  ex.label = more ? Label::more : Label::less;
  ex.category = Category::in_para;
  ex.hops = 1;
  return ex;
}

inline Example make_no_effect(Rng& rng, const World& w, const std::string& x,
                              const std::string& id) {
  const std::string& y = w.p_plain[rng.index(w.p_plain.size())];
  ParagraphPlan plan = make_paragraph(rng, w, y, {}, "");
  Example ex;
  ex.id = id;
  ex.question = make_question(x, y);
  ex.paragraph = plan.sentences;
  ex.label = Label::no_effect;
  ex.category = Category::no_effect;
  return ex;
}

inline std::vector<Example> make_split(Rng& rng, const World& w,
                                       const SynthCategoryCounts& counts,
                                       const std::string& split, bool eval_causes,
                                       double hop1_fraction) {
  const auto& pool1 = eval_causes ? w.x_out_eval_1 : w.x_out_train_1;
  const auto& pool2 = eval_causes ? w.x_out_eval_2 : w.x_out_train_2;

  std::vector<Example> out;
  const std::size_t n_hop1 = static_cast<std::size_t>(
      static_cast<double>(counts.out_of_para) * hop1_fraction + 0.5);
  std::size_t c1 = 0, c2 = 0;
  for (std::size_t i = 0; i < counts.out_of_para; ++i) {
    const bool one_hop = i < n_hop1;
    const auto& pool = one_hop ? pool1 : pool2;
    if (pool.empty())
      throw GenerationError("no " + std::string(one_hop ? "1-hop" : "2-hop") +
                            " causes available for split " + split);
    const std::string& x = one_hop ? pool[c1++ % pool.size()] : pool[c2++ % pool.size()];
    out.push_back(make_out_of_para(rng, w, x,
                                   split + "-out-" + std::to_string(i)));
  }
  for (std::size_t i = 0; i < counts.in_para; ++i) {
    const std::string& x = w.x_in[i % w.x_in.size()];
    out.push_back(make_in_para(rng, w, x, (i % 2) == 0,
                               split + "-in-" + std::to_string(i)));
  }
  for (std::size_t i = 0; i < counts.no_effect; ++i) {
    const std::string& x = w.x_ne[i % w.x_ne.size()];
    out.push_back(make_no_effect(rng, w, x, split + "-ne-" + std::to_string(i)));
  }
  rng.shuffle(out);
  return out;
}

}  // namespace synth_detail

inline SynthData gen_synthetic(const SynthSpec& spec) {
  Rng rng(spec.seed);
  synth_detail::World world = synth_detail::build_world(spec, rng);

  SynthData data;
  data.train = synth_detail::make_split(rng, world, spec.train, "train", false,
                                        spec.hop1_fraction);
  data.dev = synth_detail::make_split(rng, world, spec.dev, "dev", true,
                                      spec.hop1_fraction);
  data.test = synth_detail::make_split(rng, world, spec.test, "test", true,
                                       spec.hop1_fraction);

  for (const auto* split : {&data.train, &data.dev, &data.test}) {
    for (const Example& ex : *split) {
      std::vector<std::string> q = ex.question_tokens();
      const std::string& cause = q.at(1);
      const std::string& effect = q.at(q.size() - 2);
      synth_detail::validate_example(ex, world, cause, effect);
    }
  }
  data.kg = std::move(world.kg);
  return data;
}

}  // namespace mrrg
