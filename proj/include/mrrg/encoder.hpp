#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mrrg/kg.hpp"
#include "mrrg/recurrent.hpp"
#include "mrrg/tensor.hpp"

namespace mrrg {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Token ids with reserved control tokens. Lookup is total: anything unseen
// maps to [UNK].
class Vocabulary {
 public:
  static constexpr std::size_t kCls = 0;
  static constexpr std::size_t kSep = 1;
  static constexpr std::size_t kPad = 2;
  static constexpr std::size_t kUnk = 3;

  Vocabulary() {
    for (const char* t : {"[cls]", "[sep]", "[pad]", "[unk]"}) add(t);
  }

  std::size_t add(const std::string& token) {
    auto it = ids_.find(token);
    if (it != ids_.end()) return it->second;
    std::size_t id = tokens_.size();
    tokens_.push_back(token);
    ids_[token] = id;
    return id;
  }

  std::size_t lookup(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& token) const { return ids_.count(token) != 0; }
  std::size_t size() const { return tokens_.size(); }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }

  std::vector<std::size_t> encode(const std::vector<std::string>& toks) const {
    std::vector<std::size_t> out;
    out.reserve(toks.size());
    for (const auto& t : toks) out.push_back(lookup(t));
    return out;
  }

  // deterministic: KG surfaces and relation names plus any extra token
  // sets, sorted lexicographically before id assignment
  static Vocabulary build(const KnowledgeGraph& kg,
                          const std::vector<std::vector<std::string>>& extra_texts = {}) {
    std::set<std::string> pool;
    for (const Concept& c : kg.concepts())
      for (const std::string& t : c.surface) pool.insert(t);
    for (const Relation& r : kg.relations()) pool.insert(r.name);
    for (const auto& text : extra_texts)
      for (const std::string& t : text) pool.insert(to_lower(t));
    Vocabulary v;
    for (const std::string& t : pool) v.add(t);
    return v;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write vocabulary " + path);
    for (const std::string& t : tokens_) out << t << '\n';
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open vocabulary " + path);
    Vocabulary v;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line_no <= 4) {
        if (line != v.tokens_[line_no - 1])
          throw ConfigError(path + ": reserved token mismatch at line " +
                            std::to_string(line_no));
        continue;
      }
      if (line.empty()) continue;
      v.add(line);
    }
    return v;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

struct ContextEncoding {
  Tensor e_cls;  // (d)
  Tensor e_q;    // (len_q, d)
  Tensor e_c;    // (len_c, d)
};

struct TripletEncoding {
  Tensor e_in, e_r, e_out;  // (d) each
};

// Token embeddings + sinusoidal positions + one bidirectional gated
// recurrent layer projected back to width d. Swappable for a precomputed
// table via load_precomputed.
struct EncoderParams {
  std::size_t d = 64;
  std::size_t max_context_tokens = 256;
  Tensor token_emb;  // (V, d)
  LstmCell fwd, bwd;
  DenseLayer proj;  // 2d -> d

  static EncoderParams init(std::size_t vocab_size, std::size_t d,
                            std::size_t max_context_tokens, Rng& rng) {
    EncoderParams p;
    p.d = d;
    p.max_context_tokens = max_context_tokens;
    p.token_emb = Tensor::param({vocab_size, d}, rng,
                                std::sqrt(3.0 / static_cast<double>(d)));
    p.fwd = LstmCell::init(d, d, rng);
    p.bwd = LstmCell::init(d, d, rng);
    p.proj = DenseLayer::init(2 * d, d, DenseLayer::Act::none, rng);
    return p;
  }

  void collect_params(const std::string& prefix,
                      std::vector<std::pair<std::string, Tensor>>& out) const {
    out.emplace_back(prefix + ".token_emb", token_emb);
    fwd.collect_params(prefix + ".fwd", out);
    bwd.collect_params(prefix + ".bwd", out);
    proj.collect_params(prefix + ".proj", out);
  }
};

namespace detail {

inline Tensor sinusoid_positions(std::size_t len, std::size_t d) {
  Tensor pos = Tensor::zeros({len, d});
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t i = 0; i < d; ++i) {
      double exponent = static_cast<double>(2 * (i / 2)) / static_cast<double>(d);
      double angle = static_cast<double>(t) / std::pow(10000.0, exponent);
      pos.values()[t * d + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pos;
}

// bidirectional pass + projection over a (T,d) input
inline std::vector<Tensor> bi_encode(Tape& tape, const EncoderParams& p,
                                     const Tensor& x) {
  const std::size_t len = x.dim(0);
  std::vector<Tensor> rows;
  rows.reserve(len);
  for (std::size_t t = 0; t < len; ++t) rows.push_back(row(tape, x, t));
  std::vector<Tensor> hf = p.fwd.run_all(tape, rows, false);
  std::vector<Tensor> hb = p.bwd.run_all(tape, rows, true);
  std::vector<Tensor> out;
  out.reserve(len);
  for (std::size_t t = 0; t < len; ++t)
    out.push_back(p.proj.apply(tape, concat(tape, {hf[t], hb[t]})));
  return out;
}

}  // namespace detail

// E_[CLS], E_q, E_C for the sequence [CLS]; q; [SEP]; C (C truncated).
inline ContextEncoding encode_context(Tape& tape, const std::vector<std::string>& q,
                                      const std::vector<std::string>& c,
                                      const EncoderParams& params,
                                      const Vocabulary& vocab) {
  if (q.empty()) throw std::invalid_argument("encode_context: empty question");
  std::vector<std::string> c_trunc = c;
  if (c_trunc.size() > params.max_context_tokens)
    c_trunc.resize(params.max_context_tokens);

  std::vector<std::size_t> ids;
  ids.reserve(q.size() + c_trunc.size() + 2);
  ids.push_back(Vocabulary::kCls);
  for (const auto& t : q) ids.push_back(vocab.lookup(to_lower(t)));
  ids.push_back(Vocabulary::kSep);
  for (const auto& t : c_trunc) ids.push_back(vocab.lookup(to_lower(t)));

  Tensor emb = embedding_lookup(tape, params.token_emb, ids);
  Tensor x = add(tape, emb, detail::sinusoid_positions(ids.size(), params.d));
  std::vector<Tensor> out = detail::bi_encode(tape, params, x);

  ContextEncoding enc;
  enc.e_cls = out[0];
  std::vector<Tensor> q_rows(out.begin() + 1, out.begin() + 1 + q.size());
  std::vector<Tensor> c_rows(out.begin() + 2 + q.size(), out.end());
  enc.e_q = stack_rows(tape, q_rows);
  if (c_rows.empty()) {
    enc.e_c = Tensor::zeros({0, params.d});
  } else {
    enc.e_c = stack_rows(tape, c_rows);
  }
  return enc;
}

// head / relation / tail slot vectors: mean of token embeddings per slot,
// run through the shared recurrent layer as a 3-step sequence
inline TripletEncoding encode_triplet(Tape& tape, const Triplet& t,
                                      const KnowledgeGraph& kg,
                                      const EncoderParams& params,
                                      const Vocabulary& vocab) {
  auto slot_vec = [&](const std::vector<std::string>& toks) {
    Tensor emb = embedding_lookup(tape, params.token_emb, vocab.encode(toks));
    return mean_rows(tape, emb);
  };
  Tensor s_in = slot_vec(kg.concept_at(t.head).surface);
  Tensor s_r = slot_vec({kg.relation(t.rel).name});
  Tensor s_out = slot_vec(kg.concept_at(t.tail).surface);
  Tensor x = add(tape, stack_rows(tape, {s_in, s_r, s_out}),
                 detail::sinusoid_positions(3, params.d));
  std::vector<Tensor> out = detail::bi_encode(tape, params, x);
  return TripletEncoding{out[0], out[1], out[2]};
}

struct PrecomputedLoadStats {
  std::size_t loaded = 0;
  std::size_t skipped_unknown = 0;
};

// "token v1 v2 ... vd" per line; replaces the embedding table and freezes it
inline PrecomputedLoadStats load_precomputed(const std::string& path,
                                             const Vocabulary& vocab,
                                             EncoderParams& params) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embedding file " + path);
  PrecomputedLoadStats stats;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string token;
    ls >> token;
    std::vector<double> vals;
    double v;
    while (ls >> v) vals.push_back(v);
    if (vals.size() != params.d)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(params.d) + " values, got " +
                        std::to_string(vals.size()));
    if (!vocab.contains(token)) {
      ++stats.skipped_unknown;
      continue;
    }
    std::size_t id = vocab.lookup(token);
    std::copy(vals.begin(), vals.end(),
              params.token_emb.values().begin() + id * params.d);
    ++stats.loaded;
  }
  params.token_emb.set_requires_grad(false);
  return stats;
}

}  // namespace mrrg
