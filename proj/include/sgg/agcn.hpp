#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sgg/graph/scene_graph.hpp"
#include "sgg/numerics/params.hpp"
#include "sgg/numerics/tape.hpp"
#include "sgg/rng.hpp"

namespace sgg {

/// Object nodes plus one node per relation. Each relation node links to its
/// subject and its object; every pair of distinct objects is linked directly
/// (skip edges).
struct HeteroGraph {
  std::size_t n_objects = 0;
  std::vector<std::pair<std::size_t, std::size_t>> relations;  // (subject, object)

  std::size_t n_relations() const noexcept { return relations.size(); }

  void validate() const {
    for (std::size_t k = 0; k < relations.size(); ++k) {
      const auto [s, o] = relations[k];
      if (s >= n_objects || o >= n_objects || s == o) {
        throw InputError("HeteroGraph: relation " + std::to_string(k) + " has invalid endpoints");
      }
    }
  }

  static HeteroGraph from_edges(std::size_t n_objects, const std::vector<RelationEdge>& edges) {
    HeteroGraph g{n_objects, {}};
    for (const auto& e : edges) g.relations.emplace_back(e.subject, e.object);
    g.validate();
    return g;
  }
};

/// Message directions, each with its own attention normalisation.
enum class EdgeGroup {
  Skip,               // object <- other objects            (W_skip)
  SubjectRelations,   // object <- relations it is subject of (W_sr)
  ObjectRelations,    // object <- relations it is object of  (W_or)
  RelationSubject,    // relation <- its subject object        (W_rs)
  RelationObject,     // relation <- its object object         (W_ro)
};

inline constexpr std::array<EdgeGroup, 5> kEdgeGroups = {EdgeGroup::Skip, EdgeGroup::SubjectRelations,
                                                         EdgeGroup::ObjectRelations, EdgeGroup::RelationSubject,
                                                         EdgeGroup::RelationObject};

inline const char* group_name(EdgeGroup g) {
  switch (g) {
    case EdgeGroup::Skip: return "skip";
    case EdgeGroup::SubjectRelations: return "sr";
    case EdgeGroup::ObjectRelations: return "or";
    case EdgeGroup::RelationSubject: return "rs";
    case EdgeGroup::RelationObject: return "ro";
  }
  return "?";
}

/// (target, source) links of one group and the dense attention shape.
struct GroupLayout {
  bool target_is_object = true;
  bool source_is_object = true;
  std::size_t n_targets = 0;
  std::size_t n_sources = 0;
  std::vector<std::size_t> targets;
  std::vector<std::size_t> sources;

  std::vector<std::uint8_t> keep_mask() const {
    std::vector<std::uint8_t> keep(n_targets * n_sources, 0);
    for (std::size_t e = 0; e < targets.size(); ++e) keep[targets[e] * n_sources + sources[e]] = 1;
    return keep;
  }
};

inline GroupLayout group_layout(const HeteroGraph& g, EdgeGroup group) {
  GroupLayout l;
  const std::size_t n = g.n_objects;
  const std::size_t m = g.n_relations();
  switch (group) {
    case EdgeGroup::Skip:
      l = {true, true, n, n, {}, {}};
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (i != j) {
            l.targets.push_back(i);
            l.sources.push_back(j);
          }
      break;
    case EdgeGroup::SubjectRelations:
    case EdgeGroup::ObjectRelations:
      l = {true, false, n, m, {}, {}};
      for (std::size_t k = 0; k < m; ++k) {
        l.targets.push_back(group == EdgeGroup::SubjectRelations ? g.relations[k].first : g.relations[k].second);
        l.sources.push_back(k);
      }
      break;
    case EdgeGroup::RelationSubject:
    case EdgeGroup::RelationObject:
      l = {false, true, m, n, {}, {}};
      for (std::size_t k = 0; k < m; ++k) {
        l.targets.push_back(k);
        l.sources.push_back(group == EdgeGroup::RelationSubject ? g.relations[k].first : g.relations[k].second);
      }
      break;
  }
  return l;
}

/// Typed linear transforms, right-multiplied on row-stacked node features:
/// W_skip d_o x d_o, W_sr and W_or d_r x d_o, W_rs and W_ro d_o x d_r.
template <class T>
struct TypedTransformsT {
  T w_skip, w_sr, w_or, w_rs, w_ro;

  template <class F, class... S>
  static void visit(F&& f, S&... s) {
    f("W_skip", s.w_skip...);
    f("W_sr", s.w_sr...);
    f("W_or", s.w_or...);
    f("W_rs", s.w_rs...);
    f("W_ro", s.w_ro...);
  }
};

/// u_ij = w_h^T relu(W_a [z_i, z_j]) with W_a stored as (d_i + d_j) x d_att.
template <class T>
struct AttentionHeadT {
  T w_a;
  T w_h;  // d_att x 1

  template <class F, class... S>
  static void visit(F&& f, S&... s) {
    f("W_a", s.w_a...);
    f("w_h", s.w_h...);
  }
};

/// One aGCN level that computes its own attention (the visual level).
template <class T>
struct AgcnParamsT {
  TypedTransformsT<T> transforms;
  AttentionHeadT<T> attention;

  template <class F, class... S>
  static void visit(F&& f, S&... s) {
    TypedTransformsT<T>::visit(f, s.transforms...);
    AttentionHeadT<T>::visit(f, s.attention...);
  }
};

using TypedTransforms = TypedTransformsT<Matrix>;
using TypedTransformsVars = TypedTransformsT<Var>;
using AttentionHead = AttentionHeadT<Matrix>;
using AttentionHeadVars = AttentionHeadT<Var>;
using AgcnParams = AgcnParamsT<Matrix>;
using AgcnVars = AgcnParamsT<Var>;

/// Dense attention per group, targets x sources. Non-neighbours are 0; the
/// skip block carries the pinned self weight 1 on its diagonal.
template <class T>
struct AttentionMapT {
  T skip, sr, or_, rs, ro;

  T& operator[](EdgeGroup g) {
    switch (g) {
      case EdgeGroup::Skip: return skip;
      case EdgeGroup::SubjectRelations: return sr;
      case EdgeGroup::ObjectRelations: return or_;
      case EdgeGroup::RelationSubject: return rs;
      case EdgeGroup::RelationObject: return ro;
    }
    return skip;
  }
  const T& operator[](EdgeGroup g) const { return const_cast<AttentionMapT&>(*this)[g]; }
};

using AttentionMap = AttentionMapT<Matrix>;
using AttentionVars = AttentionMapT<Var>;

inline TypedTransforms random_typed_transforms(std::size_t d_obj, std::size_t d_rel, double scale, Rng& rng) {
  return {random_matrix(d_obj, d_obj, scale, rng), random_matrix(d_rel, d_obj, scale, rng),
          random_matrix(d_rel, d_obj, scale, rng), random_matrix(d_obj, d_rel, scale, rng),
          random_matrix(d_obj, d_rel, scale, rng)};
}

inline TypedTransforms zero_typed_transforms(std::size_t d_obj, std::size_t d_rel) {
  return {Matrix(d_obj, d_obj), Matrix(d_rel, d_obj), Matrix(d_rel, d_obj), Matrix(d_obj, d_rel),
          Matrix(d_obj, d_rel)};
}

inline AttentionHead zero_attention_head(std::size_t d_concat, std::size_t d_att) {
  return {Matrix(d_concat, d_att), Matrix(d_att, 1)};
}

namespace detail {

inline Var pin_self(Var alpha, EdgeGroup group) {
  if (group != EdgeGroup::Skip) return alpha;
  return add(alpha, alpha.tape->constant(Matrix::identity(alpha.rows())));
}

inline void check_features(Var z_obj, Var z_rel, const HeteroGraph& g) {
  if (z_obj.rows() != g.n_objects) {
    throw ShapeError("aGCN: " + std::to_string(z_obj.rows()) + " object rows for " + std::to_string(g.n_objects) +
                     " objects");
  }
  if (z_rel.rows() != g.n_relations()) {
    throw ShapeError("aGCN: " + std::to_string(z_rel.rows()) + " relation rows for " +
                     std::to_string(g.n_relations()) + " relations");
  }
}

}  // namespace detail

/// Learned attention for one group: scores u_ij for every link, softmax over
/// each target's neighbours within the group, self weight pinned to 1 for the
/// skip group. Targets with no neighbour in the group get an all-zero row.
inline Var attention_scores(const AttentionHeadVars& head, Var z_obj, Var z_rel, const HeteroGraph& g,
                            EdgeGroup group) {
  detail::check_features(z_obj, z_rel, g);
  Tape& tape = *z_obj.tape;
  const GroupLayout l = group_layout(g, group);
  if (l.targets.empty()) return detail::pin_self(tape.constant(Matrix(l.n_targets, l.n_sources)), group);
  const Var zt = select_rows(l.target_is_object ? z_obj : z_rel, l.targets);
  const Var zs = select_rows(l.source_is_object ? z_obj : z_rel, l.sources);
  const Var joint = concat_cols(zt, zs);
  if (joint.cols() != head.w_a.rows()) {
    throw ShapeError("attention: concatenated width " + std::to_string(joint.cols()) + " for W_a " +
                     head.w_a.value().shape_string());
  }
  const Var u = matmul(relu(matmul(joint, head.w_a)), head.w_h);
  const Var dense = scatter_elements(u, l.targets, l.sources, l.n_targets, l.n_sources);
  return detail::pin_self(softmax_row(dense, l.keep_mask(), EmptyRow::Zero), group);
}

/// Fixed attention: uniform over each target's neighbours in the group (what
/// the learned head yields when W_a = 0).
inline Var uniform_attention(Tape& tape, const HeteroGraph& g, EdgeGroup group) {
  const GroupLayout l = group_layout(g, group);
  return detail::pin_self(
      tape.constant(softmax_row(Matrix(l.n_targets, l.n_sources), l.keep_mask(), EmptyRow::Zero)), group);
}

inline AttentionVars attention_map(const AttentionHeadVars& head, Var z_obj, Var z_rel, const HeteroGraph& g) {
  AttentionVars a;
  for (EdgeGroup grp : kEdgeGroups) a[grp] = attention_scores(head, z_obj, z_rel, g, grp);
  return a;
}

inline AttentionVars uniform_attention_map(Tape& tape, const HeteroGraph& g) {
  AttentionVars a;
  for (EdgeGroup grp : kEdgeGroups) a[grp] = uniform_attention(tape, g, grp);
  return a;
}

inline Matrix attention_scores(const AttentionHead& head, const Matrix& z_obj, const Matrix& z_rel,
                               const HeteroGraph& g, EdgeGroup group) {
  Tape tape;
  return attention_scores(bind(tape, head, false), tape.constant(z_obj), tape.constant(z_rel), g, group).value();
}

/// Plain GCN propagation relu(z + alpha z W). `alpha` holds neighbour weights
/// only; the self term enters untransformed.
inline Var gcn_layer(Var z, Var alpha, Var w) {
  if (alpha.rows() != z.rows() || alpha.cols() != z.rows()) {
    throw ShapeError("gcn_layer: alpha " + alpha.value().shape_string() + " for " + std::to_string(z.rows()) + " nodes");
  }
  return relu(add(z, aggregate(alpha, matmul(z, w))));
}

inline Matrix gcn_layer(const Matrix& z, const Matrix& alpha, const Matrix& w) {
  Tape tape;
  return gcn_layer(tape.constant(z), tape.constant(alpha), tape.constant(w)).value();
}

/// Object update: relu(alpha_skip Z_o W_skip + alpha_sr Z_r W_sr + alpha_or Z_r W_or).
/// The self term goes through W_skip via the pinned diagonal of alpha_skip.
inline Var agcn_step_objects(const TypedTransformsVars& w, Var z_obj, Var z_rel, const AttentionVars& attn) {
  const Var from_objects = aggregate(attn.skip, matmul(z_obj, w.w_skip));
  const Var from_subject_rel = aggregate(attn.sr, matmul(z_rel, w.w_sr));
  const Var from_object_rel = aggregate(attn.or_, matmul(z_rel, w.w_or));
  return relu(add(add(from_objects, from_subject_rel), from_object_rel));
}

/// Relation update: relu(z_r + alpha_rs Z_o W_rs + alpha_ro Z_o W_ro), self
/// term untransformed.
inline Var agcn_step_relations(const TypedTransformsVars& w, Var z_obj, Var z_rel, const AttentionVars& attn) {
  const Var from_subject = aggregate(attn.rs, matmul(z_obj, w.w_rs));
  const Var from_object = aggregate(attn.ro, matmul(z_obj, w.w_ro));
  return relu(add(add(z_rel, from_subject), from_object));
}

enum class AttentionMode { Learned, Uniform };

struct TwoLevelOutput {
  Var object_logits;
  Var predicate_logits;
  std::vector<AttentionVars> visual_attention;    // computed at each visual layer
  std::vector<AttentionVars> semantic_attention;  // consumed at each semantic layer
};

/// Visual aGCN over features, recomputing attention at every layer; the
/// semantic aGCN over pre-softmax logits reuses layer l's visual attention at
/// its own layer l. Returns the semantic level's final node states.
inline TwoLevelOutput run_two_level(const AgcnVars& visual, const TypedTransformsVars& semantic, const HeteroGraph& g,
                                    Var x_obj, Var x_rel, Var logits_obj, Var logits_rel, std::size_t n_layers,
                                    AttentionMode mode = AttentionMode::Learned) {
  if (n_layers == 0) throw InputError("run_two_level: n_layers must be >= 1");
  g.validate();
  detail::check_features(x_obj, x_rel, g);
  detail::check_features(logits_obj, logits_rel, g);
  Tape& tape = *x_obj.tape;
  TwoLevelOutput out;
  Var v_obj = x_obj, v_rel = x_rel, s_obj = logits_obj, s_rel = logits_rel;
  for (std::size_t layer = 0; layer < n_layers; ++layer) {
    const AttentionVars attn = mode == AttentionMode::Learned ? attention_map(visual.attention, v_obj, v_rel, g)
                                                              : uniform_attention_map(tape, g);
    out.visual_attention.push_back(attn);
    // The last visual update would feed nothing downstream.
    if (layer + 1 < n_layers) {
      const Var next_obj = agcn_step_objects(visual.transforms, v_obj, v_rel, attn);
      v_rel = agcn_step_relations(visual.transforms, v_obj, v_rel, attn);
      v_obj = next_obj;
    }
    out.semantic_attention.push_back(attn);
    const Var next_obj = agcn_step_objects(semantic, s_obj, s_rel, attn);
    s_rel = agcn_step_relations(semantic, s_obj, s_rel, attn);
    s_obj = next_obj;
  }
  out.object_logits = s_obj;
  out.predicate_logits = s_rel;
  return out;
}

/// Sum of the mean object cross-entropy and the mean predicate cross-entropy,
/// each over the rows that have an assigned label. A term with no assigned
/// rows is left out; both empty is an error.
inline Var classification_losses(Var object_logits, Var predicate_logits,
                                 const std::vector<std::optional<std::size_t>>& object_labels,
                                 const std::vector<std::optional<std::size_t>>& predicate_labels) {
  if (object_labels.size() != object_logits.rows() || predicate_labels.size() != predicate_logits.rows()) {
    throw ShapeError("classification_losses: label count does not match logits");
  }
  auto term = [](Var logits, const std::vector<std::optional<std::size_t>>& labels) -> std::optional<Var> {
    std::vector<std::size_t> rows, targets;
    for (std::size_t r = 0; r < labels.size(); ++r) {
      if (!labels[r]) continue;
      rows.push_back(r);
      targets.push_back(*labels[r]);
    }
    if (rows.empty()) return std::nullopt;
    return cross_entropy(select_rows(logits, rows), targets);
  };
  const auto obj = term(object_logits, object_labels);
  const auto pred = term(predicate_logits, predicate_labels);
  if (obj && pred) return add(*obj, *pred);
  if (obj) return *obj;
  if (pred) return *pred;
  throw InputError("classification_losses: no assigned objects or predicates");
}

}  // namespace sgg
