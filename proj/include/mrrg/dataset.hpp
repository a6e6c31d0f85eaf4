#pragma once

#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mrrg/kg.hpp"

namespace mrrg {

enum class Label { more = 0, less = 1, no_effect = 2 };
enum class Category { in_para = 0, out_of_para = 1, no_effect = 2 };

inline const char* label_name(Label l) {
  switch (l) {
    case Label::more: return "more";
    case Label::less: return "less";
    case Label::no_effect: return "no_effect";
  }
  return "?";
}

inline const char* category_name(Category c) {
  switch (c) {
    case Category::in_para: return "in_para";
    case Category::out_of_para: return "out_of_para";
    case Category::no_effect: return "no_effect";
  }
  return "?";
}

inline std::optional<Label> parse_label(const std::string& s) {
  if (s == "more") return Label::more;
  if (s == "less") return Label::less;
  if (s == "no_effect") return Label::no_effect;
  return std::nullopt;
}

inline std::optional<Category> parse_category(const std::string& s) {
  if (s == "in_para") return Category::in_para;
  if (s == "out_of_para") return Category::out_of_para;
  if (s == "no_effect") return Category::no_effect;
  return std::nullopt;
}

struct Example {
  std::string id;
  std::string question;
  std::vector<std::string> paragraph;  // sentences
  Label label = Label::no_effect;
  Category category = Category::no_effect;
  std::optional<int> hops;  // 1..3 when annotated
  std::optional<std::vector<std::string>> entities;  // precomputed surfaces

  std::vector<std::string> question_tokens() const {
    return split_tokens(to_lower(question));
  }

  std::vector<std::string> paragraph_tokens() const {
    std::vector<std::string> out;
    for (const std::string& s : paragraph) {
      std::vector<std::string> toks = split_tokens(to_lower(s));
      out.insert(out.end(), toks.begin(), toks.end());
    }
    return out;
  }
};

inline nlohmann::json example_to_json(const Example& e) {
  nlohmann::json j;
  j["id"] = e.id;
  j["question"] = e.question;
  j["paragraph"] = e.paragraph;
  j["label"] = label_name(e.label);
  j["category"] = category_name(e.category);
  if (e.hops) j["hops"] = *e.hops;
  if (e.entities) j["entities"] = *e.entities;
  return j;
}

inline Example example_from_json(const nlohmann::json& j, const std::string& where) {
  Example e;
  for (const char* field : {"id", "question", "paragraph", "label", "category"})
    if (!j.contains(field))
      throw ParseError(where + ": missing required field '" + std::string(field) + "'");
  e.id = j.at("id").get<std::string>();
  e.question = j.at("question").get<std::string>();
  e.paragraph = j.at("paragraph").get<std::vector<std::string>>();
  if (e.paragraph.empty()) throw ParseError(where + ": paragraph must be non-empty");

  std::string label_s = j.at("label").get<std::string>();
  auto label = parse_label(label_s);
  if (!label) throw ParseError(where + ": unknown label '" + label_s + "'");
  e.label = *label;

  std::string cat_s = j.at("category").get<std::string>();
  auto cat = parse_category(cat_s);
  if (!cat) throw ParseError(where + ": unknown category '" + cat_s + "'");
  e.category = *cat;

  if (e.category == Category::no_effect && e.label != Label::no_effect)
    throw ParseError(where + ": no_effect category requires no_effect label");

  if (j.contains("hops")) {
    int h = j.at("hops").get<int>();
    if (h < 1 || h > 3) throw ParseError(where + ": hops must be 1, 2 or 3");
    e.hops = h;
  }
  if (j.contains("entities"))
    e.entities = j.at("entities").get<std::vector<std::string>>();
  return e;
}

// JSONL, one example object per line
inline std::vector<Example> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path);
  std::vector<Example> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
    out.push_back(example_from_json(j, where));
  }
  return out;
}

inline void save_dataset(const std::string& path, const std::vector<Example>& examples) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset " + path);
  for (const Example& e : examples) out << example_to_json(e).dump() << '\n';
}

}  // namespace mrrg
