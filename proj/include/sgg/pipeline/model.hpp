#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sgg/agcn.hpp"
#include "sgg/graph/io.hpp"
#include "sgg/graph/scene_graph.hpp"
#include "sgg/numerics/mlp.hpp"
#include "sgg/pipeline/world.hpp"
#include "sgg/repn.hpp"
#include "sgg/rng.hpp"

namespace sgg {

/// Model variants compared in the ablation.
enum class Variant {
  Full,            // RePN + attentional GCN
  GcnNoAttention,  // RePN + GCN with uniform neighbour weights
  NoGcn,           // RePN, heads only
  RandomPruning,   // uniformly sampled edges, heads only
};

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::GcnNoAttention: return "gcn";
    case Variant::NoGcn: return "no_gcn";
    case Variant::RandomPruning: return "random";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  for (Variant v : {Variant::Full, Variant::GcnNoAttention, Variant::NoGcn, Variant::RandomPruning})
    if (s == variant_name(v)) return v;
  throw InputError("unknown variant '" + s + "' (expected full, gcn, no_gcn or random)");
}

struct PipelineConfig {
  RepnConfig repn{16, 0.7, 16};
  Variant variant = Variant::Full;
  std::size_t agcn_layers = 2;
  std::size_t feature_dim = 64;
  std::size_t attention_dim = 256;  // 4 x feature_dim
  std::size_t repn_hidden = 64;
  std::size_t repn_proj = 64;
  std::size_t num_classes = 8;
  std::size_t num_predicates = 6;
  // toy training
  double learning_rate = 1e-2;
  std::size_t batch_size = 4;
  std::size_t epochs = 10;
  std::size_t train_instances = 64;
  std::size_t eval_instances = 32;
  std::size_t repn_batch = 128;
  std::uint64_t seed = 0;
  std::uint64_t world_seed = 0;
  WorldConfig world = [] {
    WorldConfig w;
    w.feature_dim = 64;
    return w;
  }();

  void validate() const {
    repn.validate();
    if (agcn_layers == 0) throw InputError("PipelineConfig: agcn_layers must be >= 1");
    if (feature_dim == 0 || attention_dim == 0 || repn_hidden == 0 || repn_proj == 0) {
      throw InputError("PipelineConfig: dimensions must be positive");
    }
    if (num_classes < 2 || num_predicates < 2) throw InputError("PipelineConfig: vocabularies need >= 2 entries");
    if (!(learning_rate >= 0.0) || batch_size == 0 || train_instances == 0) {
      throw InputError("PipelineConfig: bad training settings");
    }
    world.validate();
    if (world.num_classes != num_classes || world.num_predicates != num_predicates || world.feature_dim != feature_dim) {
      throw InputError("PipelineConfig: world vocabulary or feature size disagrees with the model");
    }
  }
};

inline json to_json(const WorldConfig& w) {
  return {{"num_classes", w.num_classes},
          {"num_predicates", w.num_predicates},
          {"feature_dim", w.feature_dim},
          {"planted_fraction", w.planted_fraction},
          {"relation_probability", w.relation_probability},
          {"predicate_peak", w.predicate_peak},
          {"feature_noise", w.feature_noise},
          {"label_softening", w.label_softening},
          {"label_noise", w.label_noise},
          {"confusion_share", w.confusion_share},
          {"min_objects", w.min_objects},
          {"max_objects", w.max_objects},
          {"image_size", w.image_size},
          {"min_box", w.min_box},
          {"max_box", w.max_box}};
}

inline json to_json(const PipelineConfig& c) {
  return {{"variant", variant_name(c.variant)},
          {"top_k", c.repn.top_k},
          {"nms_threshold", c.repn.nms_threshold},
          {"max_candidates", c.repn.max_candidates},
          {"agcn_layers", c.agcn_layers},
          {"feature_dim", c.feature_dim},
          {"attention_dim", c.attention_dim},
          {"repn_hidden", c.repn_hidden},
          {"repn_proj", c.repn_proj},
          {"num_classes", c.num_classes},
          {"num_predicates", c.num_predicates},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"train_instances", c.train_instances},
          {"eval_instances", c.eval_instances},
          {"repn_batch", c.repn_batch},
          {"seed", c.seed},
          {"world_seed", c.world_seed},
          {"world", to_json(c.world)}};
}

namespace detail {

template <class T>
void read_opt(const json& j, const std::string& path, const char* key, T& into) {
  auto it = j.find(key);
  if (it == j.end()) return;
  const std::string p = join(path, key);
  if constexpr (std::is_same_v<T, double>) {
    into = as_real(*it, p);
  } else if constexpr (std::is_same_v<T, std::uint64_t>) {
    if (!it->is_number_unsigned() && !(it->is_number_integer() && it->template get<long long>() >= 0)) {
      throw SchemaError(p, "expected a non-negative integer");
    }
    into = it->template get<std::uint64_t>();
  } else {
    into = as_index(*it, p);
  }
}

}  // namespace detail

/// Missing keys keep their defaults; the world section inherits vocabulary
/// and feature sizes from the top level unless it sets them.
inline PipelineConfig pipeline_config_from_json(const json& j) {
  using namespace detail;
  if (!j.is_object()) throw SchemaError("", "config must be a JSON object");
  allow_keys(j, "", {"variant", "top_k", "nms_threshold", "max_candidates", "agcn_layers", "feature_dim",
                     "attention_dim", "repn_hidden", "repn_proj", "num_classes", "num_predicates", "learning_rate",
                     "batch_size", "epochs", "train_instances", "eval_instances", "repn_batch", "seed", "world_seed",
                     "world"});
  PipelineConfig c;
  if (j.contains("variant")) {
    if (!j["variant"].is_string()) throw SchemaError("variant", "expected a string");
    c.variant = parse_variant(j["variant"].get<std::string>());
  }
  read_opt(j, "", "top_k", c.repn.top_k);
  read_opt(j, "", "nms_threshold", c.repn.nms_threshold);
  read_opt(j, "", "max_candidates", c.repn.max_candidates);
  read_opt(j, "", "agcn_layers", c.agcn_layers);
  read_opt(j, "", "feature_dim", c.feature_dim);
  c.attention_dim = 4 * c.feature_dim;
  read_opt(j, "", "attention_dim", c.attention_dim);
  read_opt(j, "", "repn_hidden", c.repn_hidden);
  read_opt(j, "", "repn_proj", c.repn_proj);
  read_opt(j, "", "num_classes", c.num_classes);
  read_opt(j, "", "num_predicates", c.num_predicates);
  read_opt(j, "", "learning_rate", c.learning_rate);
  read_opt(j, "", "batch_size", c.batch_size);
  read_opt(j, "", "epochs", c.epochs);
  read_opt(j, "", "train_instances", c.train_instances);
  read_opt(j, "", "eval_instances", c.eval_instances);
  read_opt(j, "", "repn_batch", c.repn_batch);
  read_opt(j, "", "seed", c.seed);
  read_opt(j, "", "world_seed", c.world_seed);
  c.world.num_classes = c.num_classes;
  c.world.num_predicates = c.num_predicates;
  c.world.feature_dim = c.feature_dim;
  if (j.contains("world")) {
    const json& w = j["world"];
    if (!w.is_object()) throw SchemaError("world", "expected an object");
    allow_keys(w, "world", {"num_classes", "num_predicates", "feature_dim", "planted_fraction", "relation_probability",
                            "predicate_peak", "feature_noise", "label_softening", "label_noise", "confusion_share", "min_objects", "max_objects",
                            "image_size", "min_box", "max_box"});
    read_opt(w, "world", "num_classes", c.world.num_classes);
    read_opt(w, "world", "num_predicates", c.world.num_predicates);
    read_opt(w, "world", "feature_dim", c.world.feature_dim);
    read_opt(w, "world", "planted_fraction", c.world.planted_fraction);
    read_opt(w, "world", "relation_probability", c.world.relation_probability);
    read_opt(w, "world", "predicate_peak", c.world.predicate_peak);
    read_opt(w, "world", "feature_noise", c.world.feature_noise);
    read_opt(w, "world", "label_softening", c.world.label_softening);
    read_opt(w, "world", "label_noise", c.world.label_noise);
    read_opt(w, "world", "confusion_share", c.world.confusion_share);
    read_opt(w, "world", "min_objects", c.world.min_objects);
    read_opt(w, "world", "max_objects", c.world.max_objects);
    read_opt(w, "world", "image_size", c.world.image_size);
    read_opt(w, "world", "min_box", c.world.min_box);
    read_opt(w, "world", "max_box", c.world.max_box);
  }
  c.validate();
  return c;
}

/// Every learned parameter of the pipeline.
template <class T>
struct ModelParamsT {
  RepnParamsT<T> repn;
  T union_proj;   // 2d x d
  T predicate_w;  // d x |P|
  T predicate_b;  // 1 x |P|
  AgcnParamsT<T> visual;
  TypedTransformsT<T> semantic;

  template <class F, class... S>
  static void visit(F&& f, S&... s) {
    visit_nested("repn", f, s.repn...);
    f("union.W", s.union_proj...);
    f("head.W_pred", s.predicate_w...);
    f("head.b_pred", s.predicate_b...);
    visit_nested("visual", f, s.visual...);
    visit_nested("semantic", f, s.semantic...);
  }
};

using ModelParams = ModelParamsT<Matrix>;
using ModelVars = ModelParamsT<Var>;

/// Initial parameters. The attention scorer starts with w_h = 0, i.e. exactly
/// uniform attention, so the full model starts where the no-attention variant
/// does.
inline ModelParams init_params(const PipelineConfig& c, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t d = c.feature_dim;
  ModelParams p;
  p.repn = random_repn_params(c.num_classes, c.repn_hidden, c.repn_proj, rng);
  p.union_proj = random_matrix(2 * d, d, std::sqrt(1.0 / static_cast<double>(2 * d)), rng);
  p.predicate_w = random_matrix(d, c.num_predicates, std::sqrt(1.0 / static_cast<double>(d)), rng);
  p.predicate_b = Matrix(1, c.num_predicates);
  p.visual.transforms = random_typed_transforms(d, d, std::sqrt(1.0 / static_cast<double>(d)), rng);
  p.visual.attention = {random_matrix(2 * d, c.attention_dim, std::sqrt(2.0 / static_cast<double>(2 * d)), rng),
                        Matrix(c.attention_dim, 1)};
  p.semantic = random_typed_transforms(c.num_classes, c.num_predicates, 0.1, rng);
  for (std::size_t k = 0; k < c.num_classes; ++k) p.semantic.w_skip(k, k) += 1.0;
  return p;
}

/// Pre-softmax object logits: centred log of the proposal class distribution.
inline Matrix object_input_logits(const std::vector<ObjectProposal>& proposals, std::size_t num_classes) {
  Matrix out(proposals.size(), num_classes);
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    const auto& p = proposals[i].class_dist;
    if (p.size() != num_classes) throw ShapeError("object_input_logits: class_dist length mismatch");
    double mean = 0.0;
    for (std::size_t k = 0; k < num_classes; ++k) mean += out(i, k) = std::log(std::max(p[k], kProbClamp));
    mean /= static_cast<double>(num_classes);
    for (std::size_t k = 0; k < num_classes; ++k) out(i, k) -= mean;
  }
  return out;
}

inline Matrix feature_matrix(const std::vector<ObjectProposal>& proposals, std::size_t d) {
  std::vector<std::vector<double>> rows;
  for (const auto& p : proposals) rows.push_back(p.feature);
  return Matrix::stack_rows(rows, d);
}

/// Edge selection (relationship proposal stage). Variants other than
/// RandomPruning use RePN top-K + pair-NMS; RandomPruning samples top_k
/// directed pairs uniformly (capped at max_candidates) with `pruning_seed`.
inline std::vector<ScoredPair> select_candidates(const PipelineConfig& c, const Matrix& relatedness,
                                                 const std::vector<ObjectProposal>& proposals,
                                                 std::uint64_t pruning_seed) {
  Matrix s = relatedness;
  for (std::size_t i = 0; i < s.rows(); ++i) s(i, i) = 0.0;
  if (c.variant != Variant::RandomPruning) return select_pairs(s, boxes_of(proposals), c.repn);
  const std::size_t n = proposals.size();
  std::vector<ScoredPair> all;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) all.push_back({i, j, s(i, j)});
  Rng rng(pruning_seed);
  std::vector<ScoredPair> out;
  for (std::size_t k : rng.sample_without_replacement(all.size(), std::min(c.repn.top_k, c.repn.max_candidates))) {
    out.push_back(all[k]);
  }
  return out;
}

/// Tape handles of one forward pass.
struct ForwardTrace {
  Var relatedness;  // n x n, diagonal not zeroed
  std::vector<ScoredPair> pairs;
  HeteroGraph graph;
  Var union_features;   // m x d
  Var object_logits;    // refined, n x |C|
  Var predicate_logits; // refined, m x |P|
  std::optional<TwoLevelOutput> agcn;
};

/// Graph-labelling stage over a fixed candidate edge set.
inline void label_graph(const PipelineConfig& c, const ModelVars& v, const std::vector<ObjectProposal>& proposals,
                        ForwardTrace& t) {
  Tape& tape = *t.relatedness.tape;
  std::vector<RelationEdge> edges = edges_from_pairs(t.pairs);
  t.graph = HeteroGraph::from_edges(proposals.size(), edges);
  t.union_features = matmul(tape.constant(union_feature_inputs(proposals, edges)), v.union_proj);
  const Var obj_in = tape.constant(object_input_logits(proposals, c.num_classes));
  const Var pred_in = add_bias(matmul(t.union_features, v.predicate_w), v.predicate_b);
  if (c.variant == Variant::NoGcn || c.variant == Variant::RandomPruning) {
    t.object_logits = obj_in;
    t.predicate_logits = pred_in;
    return;
  }
  const Var x_obj = tape.constant(feature_matrix(proposals, c.feature_dim));
  const AttentionMode mode = c.variant == Variant::Full ? AttentionMode::Learned : AttentionMode::Uniform;
  t.agcn = run_two_level(v.visual, v.semantic, t.graph, x_obj, t.union_features, obj_in, pred_in, c.agcn_layers, mode);
  t.object_logits = t.agcn->object_logits;
  t.predicate_logits = t.agcn->predicate_logits;
}

/// Relatedness on the tape, candidate selection off it, then labelling.
/// `extra_pairs` (training only) are appended to the candidates if absent.
inline ForwardTrace forward_on_tape(Tape& tape, const PipelineConfig& c, const ModelVars& v,
                                    const std::vector<ObjectProposal>& proposals, std::uint64_t pruning_seed = 0,
                                    const std::vector<ScoredPair>& extra_pairs = {}) {
  if (proposals.size() < 2) throw InputError("forward: need at least 2 proposals");
  ForwardTrace t;
  t.relatedness = relatedness_scores(v.repn, tape.constant(class_dist_matrix(proposals)));
  t.pairs = select_candidates(c, t.relatedness.value(), proposals, pruning_seed);
  for (const auto& extra : extra_pairs) {
    const bool present = std::any_of(t.pairs.begin(), t.pairs.end(), [&](const ScoredPair& p) {
      return p.subject == extra.subject && p.object == extra.object;
    });
    if (!present) t.pairs.push_back({extra.subject, extra.object, t.relatedness.value()(extra.subject, extra.object)});
  }
  label_graph(c, v, proposals, t);
  return t;
}

/// Proposals in, labelled scene graph out: relatedness, top-K + pair-NMS,
/// union features, two-level aGCN, softmax on every node.
inline SceneGraph forward(const PipelineConfig& c, const ModelParams& params, const std::vector<ObjectProposal>& proposals,
                          std::uint64_t pruning_seed = 0) {
  c.validate();
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    if (proposals[i].feature.size() != c.feature_dim) {
      throw ShapeError("forward: proposal " + std::to_string(i) + " feature length " +
                       std::to_string(proposals[i].feature.size()) + ", expected " + std::to_string(c.feature_dim));
    }
  }
  Tape tape;
  const ModelVars v = bind(tape, params, false);
  const ForwardTrace t = forward_on_tape(tape, c, v, proposals, pruning_seed);
  const Matrix obj = softmax_row(t.object_logits.value());
  const Matrix pred = softmax_row(t.predicate_logits.value());
  const Matrix& uf = t.union_features.value();
  SceneGraph g;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    ObjectProposal o = proposals[i];
    o.class_dist = obj.row_copy(i);
    o.attributes.clear();
    g.objects.push_back(std::move(o));
  }
  for (std::size_t e = 0; e < t.pairs.size(); ++e) {
    RelationEdge r;
    r.subject = t.pairs[e].subject;
    r.object = t.pairs[e].object;
    r.predicate_dist = pred.row_copy(e);
    r.relatedness = t.pairs[e].score;
    r.union_feature = uf.row_copy(e);
    g.edges.push_back(std::move(r));
  }
  return g;
}

}  // namespace sgg
