#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace mrrg {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using ConceptId = int;
using RelationId = int;
using TripletId = int;

struct Concept {
  ConceptId id = -1;
  std::vector<std::string> surface;  // lowercase tokens
};

struct Relation {
  RelationId id = -1;
  std::string name;
};

struct Triplet {
  ConceptId head = -1;
  RelationId rel = -1;
  ConceptId tail = -1;

  bool operator==(const Triplet&) const = default;
};

inline std::string to_lower(std::string s) {
  for (char& c : s)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return s;
}

inline std::vector<std::string> split_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

inline std::string join_tokens(const std::vector<std::string>& toks) {
  std::string out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) out += ' ';
    out += toks[i];
  }
  return out;
}

// Immutable multigraph of (head, relation, tail) triplets with head-indexed
// retrieval. Build through KgBuilder or load(); read-only afterwards, so any
// number of threads may query it.
class KnowledgeGraph {
 public:
  const std::vector<Concept>& concepts() const { return concepts_; }
  const std::vector<Relation>& relations() const { return relations_; }
  const std::vector<Triplet>& triplets() const { return triplets_; }

  const Concept& concept_at(ConceptId id) const { return concepts_.at(id); }
  const Relation& relation(RelationId id) const { return relations_.at(id); }
  const Triplet& triplet(TripletId id) const { return triplets_.at(id); }

  std::optional<ConceptId> find_concept(const std::string& joined_surface) const {
    auto it = concept_by_surface_.find(joined_surface);
    if (it == concept_by_surface_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<RelationId> find_relation(const std::string& name) const {
    auto it = relation_by_name_.find(name);
    if (it == relation_by_name_.end()) return std::nullopt;
    return it->second;
  }

  const std::vector<TripletId>& triplets_with_head(ConceptId id) const {
    return by_head_.at(id);
  }

  // longest concept surface, in tokens
  std::size_t max_surface_tokens() const { return max_surface_tokens_; }

  bool has_triplet(ConceptId head, RelationId rel, ConceptId tail) const {
    auto it = by_pair_.find({head, tail});
    if (it == by_pair_.end()) return false;
    return std::find(it->second.begin(), it->second.end(), rel) != it->second.end();
  }

  // lowest-id relation on the directed pair (a, b), if any
  std::optional<RelationId> relation_between(ConceptId a, ConceptId b) const {
    if (a < 0 || b < 0 || a >= static_cast<ConceptId>(concepts_.size()) ||
        b >= static_cast<ConceptId>(concepts_.size()))
      throw std::invalid_argument("relation_between: concept id out of range");
    auto it = by_pair_.find({a, b});
    if (it == by_pair_.end()) return std::nullopt;
    return it->second.front();
  }

  static KnowledgeGraph load(const std::string& path);

  void save_tsv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const Triplet& t : triplets_)
      out << join_tokens(concepts_[t.head].surface) << '\t' << relations_[t.rel].name
          << '\t' << join_tokens(concepts_[t.tail].surface) << '\n';
  }

 private:
  friend class KgBuilder;

  std::vector<Concept> concepts_;
  std::vector<Relation> relations_;
  std::vector<Triplet> triplets_;
  std::unordered_map<std::string, ConceptId> concept_by_surface_;
  std::unordered_map<std::string, RelationId> relation_by_name_;
  std::vector<std::vector<TripletId>> by_head_;
  std::map<std::pair<ConceptId, ConceptId>, std::vector<RelationId>> by_pair_;
  std::size_t max_surface_tokens_ = 0;
};

class KgBuilder {
 public:
  // surfaces and names are lowercased; duplicate triplets collapse
  void add(const std::string& head, const std::string& rel, const std::string& tail) {
    ConceptId h = intern_concept(head);
    ConceptId t = intern_concept(tail);
    if (h == t)
      throw std::invalid_argument("kg: self-loop triplet on '" + to_lower(head) + "'");
    RelationId r = intern_relation(rel);
    Triplet trip{h, r, t};
    std::string key = std::to_string(h) + ":" + std::to_string(r) + ":" + std::to_string(t);
    if (seen_.count(key)) return;
    seen_.insert(key);
    triplets_.push_back(trip);
  }

  std::size_t size() const { return triplets_.size(); }

  KnowledgeGraph build() {
    KnowledgeGraph kg;
    kg.concepts_ = std::move(concepts_);
    kg.relations_ = std::move(relations_);
    kg.triplets_ = std::move(triplets_);
    for (const Concept& c : kg.concepts_) {
      kg.concept_by_surface_[join_tokens(c.surface)] = c.id;
      kg.max_surface_tokens_ = std::max(kg.max_surface_tokens_, c.surface.size());
    }
    for (const Relation& r : kg.relations_) kg.relation_by_name_[r.name] = r.id;
    kg.by_head_.assign(kg.concepts_.size(), {});
    for (std::size_t i = 0; i < kg.triplets_.size(); ++i) {
      const Triplet& t = kg.triplets_[i];
      kg.by_head_[t.head].push_back(static_cast<TripletId>(i));
      kg.by_pair_[{t.head, t.tail}].push_back(t.rel);
    }
    for (auto& [pair, rels] : kg.by_pair_) std::sort(rels.begin(), rels.end());
    return kg;
  }

 private:
  ConceptId intern_concept(const std::string& raw) {
    std::vector<std::string> toks = split_tokens(to_lower(raw));
    if (toks.empty()) throw std::invalid_argument("kg: empty concept surface");
    std::string key = join_tokens(toks);
    auto it = by_surface_.find(key);
    if (it != by_surface_.end()) return it->second;
    ConceptId id = static_cast<ConceptId>(concepts_.size());
    concepts_.push_back(Concept{id, std::move(toks)});
    by_surface_[key] = id;
    return id;
  }

  RelationId intern_relation(const std::string& raw) {
    std::string name = to_lower(raw);
    if (name.empty()) throw std::invalid_argument("kg: empty relation name");
    auto it = by_name_.find(name);
    if (it != by_name_.end()) return it->second;
    RelationId id = static_cast<RelationId>(relations_.size());
    relations_.push_back(Relation{id, name});
    by_name_[name] = id;
    return id;
  }

  std::vector<Concept> concepts_;
  std::vector<Relation> relations_;
  std::vector<Triplet> triplets_;
  std::unordered_map<std::string, ConceptId> by_surface_;
  std::unordered_map<std::string, RelationId> by_name_;
  std::unordered_set<std::string> seen_;
};

// UTF-8 TSV, one "head<TAB>relation<TAB>tail" per line, '#' comments skipped.
inline KnowledgeGraph KnowledgeGraph::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open kg file " + path);
  KgBuilder builder;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::size_t tab1 = line.find('\t');
    std::size_t tab2 = tab1 == std::string::npos ? std::string::npos
                                                 : line.find('\t', tab1 + 1);
    if (tab1 == std::string::npos || tab2 == std::string::npos ||
        line.find('\t', tab2 + 1) != std::string::npos)
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": expected head<TAB>relation<TAB>tail");
    std::string head = line.substr(0, tab1);
    std::string rel = line.substr(tab1 + 1, tab2 - tab1 - 1);
    std::string tail = line.substr(tab2 + 1);
    if (head.empty() || rel.empty() || tail.empty())
      throw ParseError(path + ":" + std::to_string(line_no) + ": empty field");
    try {
      builder.add(head, rel, tail);
    } catch (const std::invalid_argument& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (builder.size() == 0)
    throw ParseError(path + ": knowledge graph is empty");
  return builder.build();
}

// ---------------------------------------------------------------------------
// Entity matching and candidate retrieval
// ---------------------------------------------------------------------------

namespace detail {

// plural-stripping variants of the last token: exact, -s, -es
inline std::vector<std::string> match_keys(const std::vector<std::string>& window) {
  std::vector<std::string> keys;
  keys.push_back(join_tokens(window));
  const std::string& last = window.back();
  std::string prefix;
  for (std::size_t i = 0; i + 1 < window.size(); ++i) prefix += window[i] + " ";
  if (last.size() > 2 && last.back() == 's' && last[last.size() - 2] != 's')
    keys.push_back(prefix + last.substr(0, last.size() - 1));
  if (last.size() > 3 && last.ends_with("es"))
    keys.push_back(prefix + last.substr(0, last.size() - 2));
  return keys;
}

}  // namespace detail

// Dictionary longest-match of KG concepts against a lowercase token sequence.
// Greedy left to right, no overlaps, result deduplicated in first-occurrence
// order.
inline std::vector<ConceptId> extract_entities(const std::vector<std::string>& tokens,
                                               const KnowledgeGraph& kg) {
  std::vector<ConceptId> out;
  std::unordered_set<ConceptId> seen;
  const std::size_t max_len = kg.max_surface_tokens();
  std::size_t i = 0;
  while (i < tokens.size()) {
    std::size_t matched_len = 0;
    ConceptId matched = -1;
    std::size_t top = std::min(max_len, tokens.size() - i);
    for (std::size_t len = top; len >= 1 && matched_len == 0; --len) {
      std::vector<std::string> window(tokens.begin() + i, tokens.begin() + i + len);
      for (const std::string& key : detail::match_keys(window)) {
        if (auto id = kg.find_concept(key)) {
          matched = *id;
          matched_len = len;
          break;
        }
      }
    }
    if (matched_len > 0) {
      if (!seen.count(matched)) {
        seen.insert(matched);
        out.push_back(matched);
      }
      i += matched_len;
    } else {
      ++i;
    }
  }
  return out;
}

// 1-hop, head-indexed retrieval: union of each entity's triplets in
// (entity occurrence order, triplet id) order, truncated to cap.
inline std::vector<Triplet> retrieve_candidates(const std::vector<ConceptId>& entities,
                                                const KnowledgeGraph& kg,
                                                std::size_t cap) {
  if (cap == 0) throw std::invalid_argument("retrieve_candidates: cap must be positive");
  std::vector<Triplet> out;
  std::unordered_set<TripletId> seen;
  for (ConceptId e : entities) {
    for (TripletId tid : kg.triplets_with_head(e)) {
      if (seen.count(tid)) continue;
      seen.insert(tid);
      out.push_back(kg.triplet(tid));
      if (out.size() == cap) return out;
    }
  }
  return out;
}

inline std::optional<RelationId> relation_between(ConceptId a, ConceptId b,
                                                  const KnowledgeGraph& kg) {
  return kg.relation_between(a, b);
}

}  // namespace mrrg
