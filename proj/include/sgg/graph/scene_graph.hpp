#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sgg/error.hpp"
#include "sgg/graph/box.hpp"

namespace sgg {

/// Probability vectors must sum to one within this tolerance.
inline constexpr double kDistributionTolerance = 1e-6;

/// One detected region: its box, pooled feature and class distribution.
struct ObjectProposal {
  Box box;
  std::vector<double> feature;
  std::vector<double> class_dist;
  std::vector<int> attributes;

  bool operator==(const ObjectProposal&) const = default;
};

/// Directed candidate relationship subject -> object.
struct RelationEdge {
  std::size_t subject = 0;
  std::size_t object = 0;
  std::vector<double> predicate_dist;  // empty until the edge is labelled
  std::optional<double> relatedness;
  std::vector<double> union_feature;

  bool operator==(const RelationEdge&) const = default;
};

/// A predicted scene graph. The optional hard labels, when present, override
/// the argmax of the corresponding distributions.
struct SceneGraph {
  std::vector<ObjectProposal> objects;
  std::vector<RelationEdge> edges;
  std::vector<int> object_labels;
  std::vector<int> predicate_labels;

  bool operator==(const SceneGraph&) const = default;
};

struct GtObject {
  Box box;
  int label = 0;
  std::vector<int> attributes;

  bool operator==(const GtObject&) const = default;
};

struct Triplet {
  std::size_t subject = 0;
  int predicate = 0;
  std::size_t object = 0;

  auto operator<=>(const Triplet&) const = default;
};

struct GroundTruthGraph {
  std::vector<GtObject> objects;
  std::vector<Triplet> triplets;

  bool operator==(const GroundTruthGraph&) const = default;
};

/// Class and predicate names; indices are the labels used everywhere else.
struct Vocabulary {
  std::vector<std::string> object_classes;
  std::vector<std::string> predicate_classes;

  bool operator==(const Vocabulary&) const = default;
};

/// Index of the largest entry, lowest index on ties.
inline std::size_t argmax(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline void validate_distribution(const std::vector<double>& dist, const std::string& path) {
  if (dist.empty()) throw SchemaError(path, "distribution is empty");
  double sum = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (!std::isfinite(dist[i]) || dist[i] < 0.0) {
      throw SchemaError(path + "[" + std::to_string(i) + "]", "probability must be finite and >= 0");
    }
    sum += dist[i];
  }
  if (std::abs(sum - 1.0) > kDistributionTolerance) {
    throw SchemaError(path, "distribution sums to " + std::to_string(sum) + ", not 1");
  }
}

inline void validate_box(const Box& b, const std::string& path) {
  if (!b.valid()) throw SchemaError(path, "box needs finite coordinates and w > 0, h > 0");
}

/// Checks every SceneGraph invariant. `num_classes` / `num_predicates` of 0
/// skip the vocabulary-size checks.
inline void validate(const SceneGraph& g, std::size_t num_classes = 0, std::size_t num_predicates = 0) {
  const std::size_t n = g.objects.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& o = g.objects[i];
    const std::string path = "objects[" + std::to_string(i) + "]";
    validate_box(o.box, path + ".box");
    validate_distribution(o.class_dist, path + ".class_dist");
    if (num_classes && o.class_dist.size() != num_classes) {
      throw SchemaError(path + ".class_dist", "expected " + std::to_string(num_classes) + " classes, got " +
                                                  std::to_string(o.class_dist.size()));
    }
    if (o.class_dist.size() != g.objects.front().class_dist.size()) {
      throw SchemaError(path + ".class_dist", "length differs from objects[0]");
    }
    if (o.feature.size() != g.objects.front().feature.size()) {
      throw SchemaError(path + ".feature", "length differs from objects[0]");
    }
    for (double v : o.feature)
      if (!std::isfinite(v)) throw SchemaError(path + ".feature", "non-finite value");
  }
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const auto& r = g.edges[e];
    const std::string path = "edges[" + std::to_string(e) + "]";
    if (r.subject >= n || r.object >= n) throw SchemaError(path, "endpoint index out of range");
    if (r.subject == r.object) throw SchemaError(path, "self-relation: subject == object");
    if (!seen.insert({r.subject, r.object}).second) {
      throw SchemaError(path, "duplicate directed pair (" + std::to_string(r.subject) + ", " +
                                  std::to_string(r.object) + ")");
    }
    if (!r.predicate_dist.empty()) {
      validate_distribution(r.predicate_dist, path + ".predicate_dist");
      if (num_predicates && r.predicate_dist.size() != num_predicates) {
        throw SchemaError(path + ".predicate_dist", "expected " + std::to_string(num_predicates) + " predicates");
      }
    }
    if (r.relatedness && !(*r.relatedness >= 0.0 && *r.relatedness <= 1.0)) {
      throw SchemaError(path + ".relatedness", "must lie in [0, 1]");
    }
  }
  if (!g.object_labels.empty() && g.object_labels.size() != n) {
    throw SchemaError("object_labels", "one label per object required");
  }
  if (!g.predicate_labels.empty() && g.predicate_labels.size() != g.edges.size()) {
    throw SchemaError("predicate_labels", "one label per edge required");
  }
}

inline void validate(const GroundTruthGraph& g, std::size_t num_classes = 0, std::size_t num_predicates = 0) {
  for (std::size_t i = 0; i < g.objects.size(); ++i) {
    const std::string path = "objects[" + std::to_string(i) + "]";
    validate_box(g.objects[i].box, path + ".box");
    const int label = g.objects[i].label;
    if (label < 0 || (num_classes && static_cast<std::size_t>(label) >= num_classes)) {
      throw SchemaError(path + ".label", "label " + std::to_string(label) + " out of range");
    }
  }
  std::set<Triplet> seen;
  for (std::size_t t = 0; t < g.triplets.size(); ++t) {
    const auto& tr = g.triplets[t];
    const std::string path = "triplets[" + std::to_string(t) + "]";
    if (tr.subject >= g.objects.size() || tr.object >= g.objects.size()) {
      throw SchemaError(path, "object index out of range");
    }
    if (tr.subject == tr.object) throw SchemaError(path, "self-relation: subject == object");
    if (tr.predicate < 0 || (num_predicates && static_cast<std::size_t>(tr.predicate) >= num_predicates)) {
      throw SchemaError(path, "predicate " + std::to_string(tr.predicate) + " out of range");
    }
    if (!seen.insert(tr).second) throw SchemaError(path, "duplicate triplet");
  }
}

/// Hard object label: explicit label when given, else argmax of class_dist.
inline int object_label(const SceneGraph& g, std::size_t i) {
  if (!g.object_labels.empty()) return g.object_labels[i];
  return static_cast<int>(argmax(g.objects[i].class_dist));
}

inline int predicate_label(const SceneGraph& g, std::size_t e) {
  if (!g.predicate_labels.empty()) return g.predicate_labels[e];
  return static_cast<int>(argmax(g.edges[e].predicate_dist));
}

/// Number of triplets each object takes part in, as subject or object.
inline std::vector<std::size_t> object_degrees(const GroundTruthGraph& g) {
  std::vector<std::size_t> deg(g.objects.size(), 0);
  for (const auto& t : g.triplets) {
    ++deg[t.subject];
    ++deg[t.object];
  }
  return deg;
}

}  // namespace sgg
