#pragma once

// Tabular layer: feature schemas, feature vectors with first-class missing
// values, datasets, projection, and the JSONL interchange format.
//
// Missing is an explicit state: a feature absent from a row's value map is
// missing, never silently zero. Set-valued features are token multisets,
// canonicalized to lowercased sorted vectors.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "ripple/core.hpp"

namespace ripple {

using json = nlohmann::json;

enum class FeatureKind { continuous, symbolic, set };
enum class FeatureGroup { asr, slu, dm, hand, derived, label };

inline const char* to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::continuous: return "continuous";
    case FeatureKind::symbolic: return "symbolic";
    case FeatureKind::set: return "set";
  }
  return "?";
}

inline FeatureKind parse_kind(const std::string& s) {
  if (s == "continuous") return FeatureKind::continuous;
  if (s == "symbolic") return FeatureKind::symbolic;
  if (s == "set") return FeatureKind::set;
  fail("bad-kind", "unknown feature kind: " + s);
}

inline const char* to_string(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::asr: return "asr";
    case FeatureGroup::slu: return "slu";
    case FeatureGroup::dm: return "dm";
    case FeatureGroup::hand: return "hand";
    case FeatureGroup::derived: return "derived";
    case FeatureGroup::label: return "label";
  }
  return "?";
}

inline FeatureGroup parse_group(const std::string& s) {
  if (s == "asr") return FeatureGroup::asr;
  if (s == "slu") return FeatureGroup::slu;
  if (s == "dm") return FeatureGroup::dm;
  if (s == "hand") return FeatureGroup::hand;
  if (s == "derived") return FeatureGroup::derived;
  if (s == "label") return FeatureGroup::label;
  fail("bad-group", "unknown feature group: " + s);
}

struct FeatureDecl {
  std::string name;
  FeatureKind kind = FeatureKind::continuous;
  FeatureGroup group = FeatureGroup::derived;
  // Symbolic: closed vocabulary when non-empty. For the label declaration
  // this is the class universe and must be non-empty.
  std::vector<std::string> allowed;
};

struct FeatureSchema {
  std::vector<FeatureDecl> features;  // declaration order preserved
  std::string label_name;
  std::vector<std::string> classes;  // class universe, declaration order
  std::map<std::string, std::size_t> index;

  bool has(const std::string& name) const { return index.count(name) > 0; }
  const FeatureDecl& at(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end()) fail("unknown-feature", "unknown feature: " + name);
    return features[it->second];
  }
  std::size_t class_index(const std::string& c) const {
    for (std::size_t i = 0; i < classes.size(); ++i)
      if (classes[i] == c) return i;
    fail("label-unknown", "label outside class universe: " + c);
  }
};

// Builds a schema from declarations; exactly one declaration must have group
// `label` (symbolic, non-empty vocabulary = class universe).
inline FeatureSchema define_schema(const std::vector<FeatureDecl>& decls) {
  FeatureSchema s;
  bool have_label = false;
  for (const auto& d : decls) {
    if (d.name.empty()) fail("empty-name", "feature with empty name");
    if (d.group == FeatureGroup::label) {
      if (have_label) fail("multiple-label", "more than one label declaration");
      if (d.kind != FeatureKind::symbolic)
        fail("label-kind", "label must be symbolic: " + d.name);
      if (d.allowed.empty())
        fail("label-kind", "label needs a class universe: " + d.name);
      for (std::size_t i = 0; i < d.allowed.size(); ++i)
        for (std::size_t j = i + 1; j < d.allowed.size(); ++j)
          if (d.allowed[i] == d.allowed[j])
            fail("duplicate-name", "duplicate class: " + d.allowed[i]);
      have_label = true;
      s.label_name = d.name;
      s.classes = d.allowed;
      continue;
    }
    if (s.index.count(d.name) || d.name == s.label_name)
      fail("duplicate-name", "duplicate feature name: " + d.name);
    s.index[d.name] = s.features.size();
    s.features.push_back(d);
  }
  if (!have_label) fail("no-label", "schema needs exactly one label declaration");
  if (s.index.count(s.label_name))
    fail("duplicate-name", "label name collides with a feature: " + s.label_name);
  return s;
}

using TokenBag = std::vector<std::string>;  // lowercased, sorted multiset
using Value = std::variant<double, std::string, TokenBag>;

// Whitespace tokenization + lowercasing into the canonical multiset form.
inline TokenBag tokenize(std::string_view text) {
  TokenBag bag;
  std::string cur;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) bag.push_back(cur), cur.clear();
    } else {
      cur.push_back(static_cast<char>(
          std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!cur.empty()) bag.push_back(cur);
  std::sort(bag.begin(), bag.end());
  return bag;
}

inline TokenBag canonical_bag(TokenBag bag) {
  for (auto& t : bag)
    for (auto& ch : t) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  std::sort(bag.begin(), bag.end());
  return bag;
}

inline std::string lower(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

struct FeatureVector {
  std::string id;
  std::optional<std::string> label;
  std::map<std::string, Value> values;  // absent key = missing

  bool has(const std::string& name) const { return values.count(name) > 0; }
  const Value* get(const std::string& name) const {
    auto it = values.find(name);
    return it == values.end() ? nullptr : &it->second;
  }
  double num(const std::string& name) const {
    return std::get<double>(values.at(name));
  }
  const std::string& sym(const std::string& name) const {
    return std::get<std::string>(values.at(name));
  }
  const TokenBag& bag(const std::string& name) const {
    return std::get<TokenBag>(values.at(name));
  }
};

struct Dataset {
  FeatureSchema schema;
  std::vector<FeatureVector> rows;

  std::size_t size() const { return rows.size(); }
};

// Validates one row against a schema; errors name the offending feature.
inline void validate_example(const FeatureSchema& schema, const FeatureVector& fv) {
  for (const auto& [name, value] : fv.values) {
    auto it = schema.index.find(name);
    if (it == schema.index.end())
      fail("unknown-feature", "row '" + fv.id + "': unknown feature: " + name);
    const FeatureDecl& d = schema.features[it->second];
    switch (d.kind) {
      case FeatureKind::continuous: {
        if (!std::holds_alternative<double>(value))
          fail("kind-mismatch", "row '" + fv.id + "': feature '" + name +
                                    "' expects a continuous value");
        double v = std::get<double>(value);
        if (!std::isfinite(v))
          fail("not-finite", "row '" + fv.id + "': feature '" + name +
                                 "' is not finite");
        break;
      }
      case FeatureKind::symbolic: {
        if (!std::holds_alternative<std::string>(value))
          fail("kind-mismatch", "row '" + fv.id + "': feature '" + name +
                                    "' expects a symbolic value");
        if (!d.allowed.empty()) {
          const auto& v = std::get<std::string>(value);
          if (std::find(d.allowed.begin(), d.allowed.end(), v) == d.allowed.end())
            fail("value-not-allowed", "row '" + fv.id + "': feature '" + name +
                                          "' has value outside vocabulary: " + v);
        }
        break;
      }
      case FeatureKind::set:
        if (!std::holds_alternative<TokenBag>(value))
          fail("kind-mismatch", "row '" + fv.id + "': feature '" + name +
                                    "' expects a token multiset");
        break;
    }
  }
  if (fv.label) {
    if (std::find(schema.classes.begin(), schema.classes.end(), *fv.label) ==
        schema.classes.end())
      fail("label-unknown",
           "row '" + fv.id + "': label outside class universe: " + *fv.label);
  }
}

inline void validate(const Dataset& ds) {
  std::map<std::string, int> seen;
  for (const auto& row : ds.rows) {
    validate_example(ds.schema, row);
    if (++seen[row.id] > 1) fail("duplicate-id", "duplicate example id: " + row.id);
  }
}

// Keeps the requested features (plus the label); schema order is preserved.
// Projecting twice with the same names is a no-op.
inline Dataset project(const Dataset& ds, const std::vector<std::string>& names) {
  std::vector<bool> keep(ds.schema.features.size(), false);
  for (const auto& n : names) {
    auto it = ds.schema.index.find(n);
    if (it == ds.schema.index.end())
      fail("unknown-feature", "project: unknown feature: " + n);
    keep[it->second] = true;
  }
  Dataset out;
  std::vector<FeatureDecl> decls;
  for (std::size_t i = 0; i < ds.schema.features.size(); ++i)
    if (keep[i]) decls.push_back(ds.schema.features[i]);
  decls.push_back(FeatureDecl{ds.schema.label_name, FeatureKind::symbolic,
                              FeatureGroup::label, ds.schema.classes});
  out.schema = define_schema(decls);
  out.rows.reserve(ds.rows.size());
  for (const auto& row : ds.rows) {
    FeatureVector fv;
    fv.id = row.id;
    fv.label = row.label;
    for (const auto& [name, value] : row.values)
      if (out.schema.has(name)) fv.values.emplace(name, value);
    out.rows.push_back(std::move(fv));
  }
  return out;
}

// ---- interchange format (JSON lines) ----
//
// First line: {"#schema": {...}}. Then one example per line:
// {"id": ..., "label": ..., "values": {...}}; missing features are simply
// omitted; token multisets are arrays of strings.

inline json schema_to_json(const FeatureSchema& s) {
  json feats = json::array();
  for (const auto& d : s.features) {
    json f{{"name", d.name}, {"kind", to_string(d.kind)}, {"group", to_string(d.group)}};
    if (!d.allowed.empty()) f["allowed"] = d.allowed;
    feats.push_back(std::move(f));
  }
  return json{{"features", feats},
              {"label", json{{"name", s.label_name}, {"classes", s.classes}}}};
}

inline FeatureSchema schema_from_json(const json& j) {
  std::vector<FeatureDecl> decls;
  for (const auto& f : j.at("features")) {
    FeatureDecl d;
    d.name = f.at("name").get<std::string>();
    d.kind = parse_kind(f.at("kind").get<std::string>());
    d.group = parse_group(f.at("group").get<std::string>());
    if (f.contains("allowed")) d.allowed = f.at("allowed").get<std::vector<std::string>>();
    decls.push_back(std::move(d));
  }
  FeatureDecl lab;
  lab.name = j.at("label").at("name").get<std::string>();
  lab.kind = FeatureKind::symbolic;
  lab.group = FeatureGroup::label;
  lab.allowed = j.at("label").at("classes").get<std::vector<std::string>>();
  decls.push_back(std::move(lab));
  return define_schema(decls);
}

inline json value_to_json(const Value& v) {
  if (std::holds_alternative<double>(v)) return std::get<double>(v);
  if (std::holds_alternative<std::string>(v)) return std::get<std::string>(v);
  return std::get<TokenBag>(v);
}

inline json row_to_json(const FeatureVector& fv) {
  json values = json::object();
  for (const auto& [name, value] : fv.values) values[name] = value_to_json(value);
  json j{{"id", fv.id}, {"values", values}};
  if (fv.label) j["label"] = *fv.label;
  return j;
}

inline FeatureVector row_from_json(const json& j, const FeatureSchema& schema) {
  FeatureVector fv;
  fv.id = j.at("id").get<std::string>();
  if (j.contains("label")) fv.label = j.at("label").get<std::string>();
  for (const auto& [name, jv] : j.at("values").items()) {
    auto it = schema.index.find(name);
    if (it == schema.index.end())
      fail("unknown-feature", "row '" + fv.id + "': unknown feature: " + name);
    switch (schema.features[it->second].kind) {
      case FeatureKind::continuous:
        if (!jv.is_number())
          fail("kind-mismatch", "row '" + fv.id + "': feature '" + name +
                                    "' expects a number");
        fv.values.emplace(name, jv.get<double>());
        break;
      case FeatureKind::symbolic:
        if (!jv.is_string())
          fail("kind-mismatch", "row '" + fv.id + "': feature '" + name +
                                    "' expects a string");
        fv.values.emplace(name, jv.get<std::string>());
        break;
      case FeatureKind::set: {
        if (!jv.is_array())
          fail("kind-mismatch", "row '" + fv.id + "': feature '" + name +
                                    "' expects an array of tokens");
        TokenBag bag;
        for (const auto& t : jv) bag.push_back(t.get<std::string>());
        fv.values.emplace(name, std::move(bag));
        break;
      }
    }
  }
  validate_example(schema, fv);
  return fv;
}

inline std::string save_dataset_text(const Dataset& ds) {
  std::string out;
  out += json{{"#schema", schema_to_json(ds.schema)}}.dump();
  out += '\n';
  for (const auto& row : ds.rows) {
    out += row_to_json(row).dump();
    out += '\n';
  }
  return out;
}

inline Dataset load_dataset_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  Dataset ds;
  bool have_schema = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, true);
    if (!have_schema) {
      if (!j.contains("#schema"))
        fail("bad-format", "dataset must start with a #schema record");
      ds.schema = schema_from_json(j.at("#schema"));
      have_schema = true;
      continue;
    }
    ds.rows.push_back(row_from_json(j, ds.schema));
  }
  if (!have_schema) fail("bad-format", "empty dataset stream");
  return ds;
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("missing-file", "cannot write: " + path);
  out << save_dataset_text(ds);
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("missing-file", "cannot read: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_dataset_text(ss.str());
}

inline std::string schema_fingerprint(const FeatureSchema& s) {
  return hex64(fnv1a64(schema_to_json(s).dump()));
}

}  // namespace ripple
