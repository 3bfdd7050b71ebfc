#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "sgg/error.hpp"
#include "sgg/graph/scene_graph.hpp"

namespace sgg {

using json = nlohmann::json;

/// Loader knobs. With `logits` set, class_dist and predicate_dist are read as
/// raw scores and softmax-normalised on ingest instead of being validated as
/// probabilities.
struct LoadOptions {
  bool logits = false;
  std::size_t num_classes = 0;     // 0: do not check against a vocabulary
  std::size_t num_predicates = 0;
};

using AnyGraph = std::variant<SceneGraph, GroundTruthGraph>;

namespace detail {

inline void allow_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : keys) known = known || item.key() == k;
    if (!known) throw SchemaError(path.empty() ? item.key() : path + "." + item.key(), "unknown field");
  }
}

inline const json& field(const json& j, const std::string& path, const char* key) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(path.empty() ? key : path + "." + key, "missing required field");
  return *it;
}

inline std::string join(const std::string& path, const char* key) { return path.empty() ? key : path + "." + key; }

inline double as_real(const json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw SchemaError(path, "non-finite number");
  return v;
}

inline long long as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw SchemaError(path, "expected an integer");
  return j.get<long long>();
}

inline std::size_t as_index(const json& j, const std::string& path) {
  const long long v = as_int(j, path);
  if (v < 0) throw SchemaError(path, "index must be non-negative");
  return static_cast<std::size_t>(v);
}

inline std::vector<double> as_reals(const json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_real(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline std::vector<int> as_ints(const json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array of integers");
  std::vector<int> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(static_cast<int>(as_int(j[i], path + "[" + std::to_string(i) + "]")));
  return out;
}

inline std::vector<std::string> as_strings(const json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_string()) throw SchemaError(path + "[" + std::to_string(i) + "]", "expected a string");
    out.push_back(j[i].get<std::string>());
  }
  return out;
}

inline Box as_box(const json& j, const std::string& path) {
  const auto v = as_reals(j, path);
  if (v.size() != 4) throw SchemaError(path, "expected [x, y, w, h]");
  return {v[0], v[1], v[2], v[3]};
}

inline json box_json(const Box& b) { return json::array({b.x, b.y, b.w, b.h}); }

inline std::vector<double> softmax_vector(const std::vector<double>& logits) {
  double m = logits.empty() ? 0.0 : logits[0];
  for (double v : logits) m = std::max(m, v);
  std::vector<double> out(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) z += out[i] = std::exp(logits[i] - m);
  for (double& v : out) v /= z;
  return out;
}

}  // namespace detail

inline json to_json(const SceneGraph& g) {
  json objects = json::array();
  for (std::size_t i = 0; i < g.objects.size(); ++i) {
    const auto& o = g.objects[i];
    json jo = {{"box", detail::box_json(o.box)}, {"class_dist", o.class_dist}, {"feature", o.feature}};
    if (!o.attributes.empty()) jo["attributes"] = o.attributes;
    if (!g.object_labels.empty()) jo["label"] = g.object_labels[i];
    objects.push_back(std::move(jo));
  }
  json edges = json::array();
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const auto& r = g.edges[e];
    json je = {{"subject", r.subject}, {"object", r.object}};
    if (!r.predicate_dist.empty()) je["predicate_dist"] = r.predicate_dist;
    if (r.relatedness) je["relatedness"] = *r.relatedness;
    if (!r.union_feature.empty()) je["union_feature"] = r.union_feature;
    if (!g.predicate_labels.empty()) je["label"] = g.predicate_labels[e];
    edges.push_back(std::move(je));
  }
  return {{"objects", std::move(objects)}, {"edges", std::move(edges)}};
}

inline json to_json(const GroundTruthGraph& g) {
  json objects = json::array();
  for (const auto& o : g.objects) {
    json jo = {{"box", detail::box_json(o.box)}, {"label", o.label}};
    if (!o.attributes.empty()) jo["attributes"] = o.attributes;
    objects.push_back(std::move(jo));
  }
  json triplets = json::array();
  for (const auto& t : g.triplets) triplets.push_back(json::array({t.subject, t.predicate, t.object}));
  return {{"objects", std::move(objects)}, {"triplets", std::move(triplets)}};
}

inline json to_json(const Vocabulary& v) {
  return {{"object_classes", v.object_classes}, {"predicate_classes", v.predicate_classes}};
}

inline SceneGraph scene_graph_from_json(const json& j, const LoadOptions& opts = {}) {
  using namespace detail;
  if (!j.is_object()) throw SchemaError("", "expected a JSON object at top level");
  allow_keys(j, "", {"objects", "edges"});
  const json& jobjects = field(j, "", "objects");
  const json& jedges = field(j, "", "edges");
  if (!jobjects.is_array()) throw SchemaError("objects", "expected an array");
  if (!jedges.is_array()) throw SchemaError("edges", "expected an array");

  SceneGraph g;
  std::size_t labelled_objects = 0;
  for (std::size_t i = 0; i < jobjects.size(); ++i) {
    const std::string path = "objects[" + std::to_string(i) + "]";
    const json& jo = jobjects[i];
    if (!jo.is_object()) throw SchemaError(path, "expected an object");
    allow_keys(jo, path, {"box", "class_dist", "feature", "attributes", "label"});
    ObjectProposal o;
    o.box = as_box(field(jo, path, "box"), path + ".box");
    o.class_dist = as_reals(field(jo, path, "class_dist"), path + ".class_dist");
    if (opts.logits) o.class_dist = softmax_vector(o.class_dist);
    if (jo.contains("feature")) o.feature = as_reals(jo["feature"], path + ".feature");
    if (jo.contains("attributes")) o.attributes = as_ints(jo["attributes"], path + ".attributes");
    if (jo.contains("label")) {
      g.object_labels.push_back(static_cast<int>(as_int(jo["label"], path + ".label")));
      ++labelled_objects;
    }
    g.objects.push_back(std::move(o));
  }
  if (labelled_objects != 0 && labelled_objects != g.objects.size()) {
    throw SchemaError("objects", "either every object or none carries a label");
  }

  std::size_t labelled_edges = 0;
  for (std::size_t e = 0; e < jedges.size(); ++e) {
    const std::string path = "edges[" + std::to_string(e) + "]";
    const json& je = jedges[e];
    if (!je.is_object()) throw SchemaError(path, "expected an object");
    allow_keys(je, path, {"subject", "object", "predicate_dist", "relatedness", "union_feature", "label"});
    RelationEdge r;
    r.subject = as_index(field(je, path, "subject"), path + ".subject");
    r.object = as_index(field(je, path, "object"), path + ".object");
    if (je.contains("predicate_dist")) {
      r.predicate_dist = as_reals(je["predicate_dist"], path + ".predicate_dist");
      if (opts.logits) r.predicate_dist = softmax_vector(r.predicate_dist);
    }
    if (je.contains("relatedness")) r.relatedness = as_real(je["relatedness"], path + ".relatedness");
    if (je.contains("union_feature")) r.union_feature = as_reals(je["union_feature"], path + ".union_feature");
    if (je.contains("label")) {
      g.predicate_labels.push_back(static_cast<int>(as_int(je["label"], path + ".label")));
      ++labelled_edges;
    }
    g.edges.push_back(std::move(r));
  }
  if (labelled_edges != 0 && labelled_edges != g.edges.size()) {
    throw SchemaError("edges", "either every edge or none carries a label");
  }
  validate(g, opts.num_classes, opts.num_predicates);
  return g;
}

inline GroundTruthGraph ground_truth_from_json(const json& j, const LoadOptions& opts = {}) {
  using namespace detail;
  if (!j.is_object()) throw SchemaError("", "expected a JSON object at top level");
  allow_keys(j, "", {"objects", "triplets"});
  const json& jobjects = field(j, "", "objects");
  const json& jtriplets = field(j, "", "triplets");
  if (!jobjects.is_array()) throw SchemaError("objects", "expected an array");
  if (!jtriplets.is_array()) throw SchemaError("triplets", "expected an array");
  GroundTruthGraph g;
  for (std::size_t i = 0; i < jobjects.size(); ++i) {
    const std::string path = "objects[" + std::to_string(i) + "]";
    const json& jo = jobjects[i];
    if (!jo.is_object()) throw SchemaError(path, "expected an object");
    allow_keys(jo, path, {"box", "label", "attributes"});
    GtObject o;
    o.box = as_box(field(jo, path, "box"), path + ".box");
    o.label = static_cast<int>(as_int(field(jo, path, "label"), path + ".label"));
    if (jo.contains("attributes")) o.attributes = as_ints(jo["attributes"], path + ".attributes");
    g.objects.push_back(std::move(o));
  }
  for (std::size_t t = 0; t < jtriplets.size(); ++t) {
    const std::string path = "triplets[" + std::to_string(t) + "]";
    const json& jt = jtriplets[t];
    if (!jt.is_array() || jt.size() != 3) throw SchemaError(path, "expected [subject, predicate, object]");
    g.triplets.push_back({as_index(jt[0], path + "[0]"), static_cast<int>(as_int(jt[1], path + "[1]")),
                          as_index(jt[2], path + "[2]")});
  }
  validate(g, opts.num_classes, opts.num_predicates);
  return g;
}

inline Vocabulary vocabulary_from_json(const json& j) {
  using namespace detail;
  allow_keys(j, "", {"object_classes", "predicate_classes"});
  Vocabulary v;
  v.object_classes = as_strings(field(j, "", "object_classes"), "object_classes");
  v.predicate_classes = as_strings(field(j, "", "predicate_classes"), "predicate_classes");
  if (v.object_classes.empty()) throw SchemaError("object_classes", "vocabulary is empty");
  if (v.predicate_classes.empty()) throw SchemaError("predicate_classes", "vocabulary is empty");
  return v;
}

/// Dispatches on the top-level keys: "triplets" means ground truth.
inline AnyGraph graph_from_json(const json& j, const LoadOptions& opts = {}) {
  if (j.is_object() && j.contains("triplets")) return ground_truth_from_json(j, opts);
  return scene_graph_from_json(j, opts);
}

/// Canonical text form: two-space indent, trailing newline. Reals use the
/// shortest representation that parses back to the identical double.
inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("write failed for " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <class Load>
auto load_with_path(const std::filesystem::path& path, Load&& load) {
  const json j = read_json_file(path);
  try {
    return load(j);
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ":" + e.path(), e.what());
  }
}

inline AnyGraph load_graph(const std::filesystem::path& path, const LoadOptions& opts = {}) {
  return load_with_path(path, [&](const json& j) { return graph_from_json(j, opts); });
}

inline SceneGraph load_scene_graph(const std::filesystem::path& path, const LoadOptions& opts = {}) {
  return load_with_path(path, [&](const json& j) { return scene_graph_from_json(j, opts); });
}

inline GroundTruthGraph load_ground_truth(const std::filesystem::path& path, const LoadOptions& opts = {}) {
  return load_with_path(path, [&](const json& j) { return ground_truth_from_json(j, opts); });
}

inline Vocabulary load_vocabulary(const std::filesystem::path& path) {
  return load_with_path(path, [](const json& j) { return vocabulary_from_json(j); });
}

inline void save_graph(const SceneGraph& g, const std::filesystem::path& path) {
  validate(g);
  write_text_file(path, dump(to_json(g)));
}

inline void save_graph(const GroundTruthGraph& g, const std::filesystem::path& path) {
  validate(g);
  write_text_file(path, dump(to_json(g)));
}

}  // namespace sgg
