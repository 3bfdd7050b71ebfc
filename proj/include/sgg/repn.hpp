#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <tuple>
#include <vector>

#include "sgg/graph/box.hpp"
#include "sgg/graph/scene_graph.hpp"
#include "sgg/numerics/mlp.hpp"
#include "sgg/numerics/tape.hpp"
#include "sgg/rng.hpp"

namespace sgg {

/// Subject projection `phi` and object projection `psi` of the relatedness
/// kernel s_ij = sigmoid(<phi(p_i), psi(p_j)>). Same architecture, separate
/// weights.
template <class T>
struct RepnParamsT {
  Mlp2T<T> phi;
  Mlp2T<T> psi;

  template <class F, class... S>
  static void visit(F&& f, S&... s) {
    visit_nested("phi", f, s.phi...);
    visit_nested("psi", f, s.psi...);
  }
};

using RepnParams = RepnParamsT<Matrix>;
using RepnVars = RepnParamsT<Var>;

struct RepnConfig {
  std::size_t top_k = 64;
  double nms_threshold = 0.7;
  std::size_t max_candidates = 64;

  void validate() const {
    if (top_k < 1) throw InputError("RepnConfig: top_k must be >= 1");
    if (!(nms_threshold > 0.0 && nms_threshold < 1.0)) throw InputError("RepnConfig: nms_threshold must lie in (0, 1)");
    if (max_candidates < 1) throw InputError("RepnConfig: max_candidates must be >= 1");
  }
};

inline RepnParams random_repn_params(std::size_t num_classes, std::size_t hidden, std::size_t proj, Rng& rng) {
  RepnParams p;
  p.phi = random_mlp2(num_classes, hidden, proj, rng);
  p.psi = random_mlp2(num_classes, hidden, proj, rng);
  return p;
}

inline void validate(const RepnParams& p) {
  validate(p.phi);
  validate(p.psi);
  bool same = true;
  visit_params([&](const std::string&, const Matrix& a, const Matrix& b) { same = same && a.same_shape(b); }, p.phi,
               p.psi);
  if (!same) throw ShapeError("RepnParams: phi and psi shapes differ");
}

/// Pre-diagonal relatedness sigmoid(phi(P) psi(P)^T): two batched MLP passes
/// and one product. Entry (i, j) scores i as subject, j as object.
inline Var relatedness_scores(const RepnVars& params, Var class_dists) {
  if (class_dists.cols() != params.phi.w1.rows()) {
    throw ShapeError("relatedness: class_dists " + class_dists.value().shape_string() + " for " +
                     std::to_string(params.phi.w1.rows()) + " classes");
  }
  const Var subj = mlp2_forward(params.phi, class_dists);
  const Var obj = mlp2_forward(params.psi, class_dists);
  return sigmoid(matmul(subj, transpose(obj)));
}

/// n x n relatedness with the diagonal forced to 0 (no self-pairs).
inline Matrix relatedness_matrix(const RepnParams& params, const Matrix& class_dists) {
  validate(params);
  Tape tape;
  Matrix s = relatedness_scores(bind(tape, params, false), tape.constant(class_dists)).value();
  for (std::size_t i = 0; i < s.rows(); ++i) s(i, i) = 0.0;
  return s;
}

struct BoxPair {
  Box subject;
  Box object;
};

/// Overlap of two ordered box pairs: subject is compared with subject and
/// object with object, summed intersections over summed unions.
inline double pair_iou(const BoxPair& a, const BoxPair& b) {
  const double inter = intersection_area(a.subject, b.subject) + intersection_area(a.object, b.object);
  const double uni = union_area(a.subject, b.subject) + union_area(a.object, b.object);
  return uni > 0.0 ? inter / uni : 0.0;
}

struct ScoredPair {
  std::size_t subject = 0;
  std::size_t object = 0;
  double score = 0.0;

  bool operator==(const ScoredPair&) const = default;
};

/// All off-diagonal pairs by descending score, ties by (subject, object).
inline std::vector<ScoredPair> rank_pairs(const Matrix& scores) {
  std::vector<ScoredPair> pairs;
  pairs.reserve(scores.rows() * (scores.rows() ? scores.rows() - 1 : 0));
  for (std::size_t i = 0; i < scores.rows(); ++i)
    for (std::size_t j = 0; j < scores.cols(); ++j)
      if (i != j) pairs.push_back({i, j, scores(i, j)});
  std::sort(pairs.begin(), pairs.end(), [](const ScoredPair& a, const ScoredPair& b) {
    if (a.score != b.score) return a.score > b.score;
    return std::tie(a.subject, a.object) < std::tie(b.subject, b.object);
  });
  return pairs;
}

/// Greedy pair-NMS over an already ranked list: a pair is dropped when its
/// pair_iou with any kept pair exceeds `threshold`.
inline std::vector<ScoredPair> pair_nms(const std::vector<ScoredPair>& ranked, const std::vector<Box>& boxes,
                                        double threshold) {
  std::vector<ScoredPair> kept;
  for (const auto& cand : ranked) {
    const BoxPair cb{boxes[cand.subject], boxes[cand.object]};
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const ScoredPair& k) {
      return pair_iou(BoxPair{boxes[k.subject], boxes[k.object]}, cb) > threshold;
    });
    if (!suppressed) kept.push_back(cand);
  }
  return kept;
}

/// Top-K by score, then NMS, then the max_candidates cap.
inline std::vector<ScoredPair> select_pairs(const Matrix& scores, const std::vector<Box>& boxes,
                                            const RepnConfig& config) {
  config.validate();
  if (scores.rows() != boxes.size() || scores.cols() != boxes.size()) {
    throw ShapeError("select_pairs: score matrix " + scores.shape_string() + " for " + std::to_string(boxes.size()) +
                     " boxes");
  }
  auto ranked = rank_pairs(scores);
  if (ranked.size() > config.top_k) ranked.resize(config.top_k);
  auto kept = pair_nms(ranked, boxes, config.nms_threshold);
  if (kept.size() > config.max_candidates) kept.resize(config.max_candidates);
  return kept;
}

inline std::vector<Box> boxes_of(const std::vector<ObjectProposal>& proposals) {
  std::vector<Box> boxes;
  boxes.reserve(proposals.size());
  for (const auto& p : proposals) boxes.push_back(p.box);
  return boxes;
}

inline Matrix class_dist_matrix(const std::vector<ObjectProposal>& proposals) {
  std::vector<std::vector<double>> rows;
  for (const auto& p : proposals) rows.push_back(p.class_dist);
  return Matrix::stack_rows(rows, proposals.empty() ? 0 : proposals.front().class_dist.size());
}

inline std::vector<RelationEdge> edges_from_pairs(const std::vector<ScoredPair>& pairs) {
  std::vector<RelationEdge> edges;
  edges.reserve(pairs.size());
  for (const auto& p : pairs) {
    RelationEdge e;
    e.subject = p.subject;
    e.object = p.object;
    e.relatedness = p.score;
    edges.push_back(std::move(e));
  }
  return edges;
}

/// Scores every directed pair of proposals and returns the surviving
/// candidate edges, each carrying its relatedness. Predicate distributions and
/// union features are filled in by later stages.
inline std::vector<RelationEdge> propose_relations(const RepnParams& params, const RepnConfig& config,
                                                   const std::vector<ObjectProposal>& proposals) {
  if (proposals.size() < 2) throw InputError("propose_relations: need at least 2 proposals");
  const Matrix s = relatedness_matrix(params, class_dist_matrix(proposals));
  return edges_from_pairs(select_pairs(s, boxes_of(proposals), config));
}

/// [elementwise max | mean] of two endpoint features, length 2d. The input to
/// the learned union projection.
inline std::vector<double> union_feature_input(const std::vector<double>& fa, const std::vector<double>& fb) {
  if (fa.size() != fb.size()) {
    throw ShapeError("union_feature: feature lengths " + std::to_string(fa.size()) + " and " +
                     std::to_string(fb.size()));
  }
  const std::size_t d = fa.size();
  std::vector<double> out(2 * d);
  for (std::size_t k = 0; k < d; ++k) {
    out[k] = std::max(fa[k], fb[k]);
    out[d + k] = 0.5 * (fa[k] + fb[k]);
  }
  return out;
}

/// Pixel-free stand-in for pooling over the union box: the max|mean summary
/// of the endpoint features mapped back to d by `projection` (2d x d).
inline std::vector<double> union_feature(const std::vector<double>& fa, const std::vector<double>& fb,
                                         const Matrix& projection) {
  const auto in = union_feature_input(fa, fb);
  if (projection.rows() != in.size()) {
    throw ShapeError("union_feature: projection " + projection.shape_string() + " for input length " +
                     std::to_string(in.size()));
  }
  return matmul(Matrix::row_vector(in), projection).row_copy(0);
}

/// Stacked union_feature_input rows, one per edge (E x 2d).
inline Matrix union_feature_inputs(const std::vector<ObjectProposal>& proposals,
                                   const std::vector<RelationEdge>& edges) {
  const std::size_t d = proposals.empty() ? 0 : proposals.front().feature.size();
  std::vector<std::vector<double>> rows;
  rows.reserve(edges.size());
  for (const auto& e : edges) rows.push_back(union_feature_input(proposals[e.subject].feature, proposals[e.object].feature));
  return Matrix::stack_rows(rows, 2 * d);
}

/// Mean BCE of relatedness scores (one per sampled pair) against 0/1 labels.
inline Var repn_loss(Var scores, const std::vector<double>& labels) {
  if (scores.value().size() != labels.size()) {
    throw ShapeError("repn_loss: " + std::to_string(scores.value().size()) + " scores, " +
                     std::to_string(labels.size()) + " labels");
  }
  return binary_cross_entropy(scores, labels);
}

struct PairSample {
  std::size_t subject = 0;
  std::size_t object = 0;
  double label = 0.0;
};

/// Minimum pair_iou for a proposal pair to count as a ground-truth relation.
inline constexpr double kPositivePairIou = 0.5;

/// Whether proposal pair (i, j) overlaps an ordered ground-truth triplet pair.
inline bool matches_ground_truth_pair(const std::vector<ObjectProposal>& proposals, std::size_t i, std::size_t j,
                                      const GroundTruthGraph& gt) {
  const BoxPair p{proposals[i].box, proposals[j].box};
  return std::any_of(gt.triplets.begin(), gt.triplets.end(), [&](const Triplet& t) {
    return pair_iou(p, BoxPair{gt.objects[t.subject].box, gt.objects[t.object].box}) >= kPositivePairIou;
  });
}

/// Training pairs for the relatedness loss: every positive pair (capped at
/// `batch`), then negatives drawn uniformly without replacement until the
/// batch is full or negatives run out.
inline std::vector<PairSample> sample_training_pairs(const std::vector<ObjectProposal>& proposals,
                                                     const GroundTruthGraph& gt, std::size_t batch, Rng& rng) {
  std::vector<PairSample> positives, negatives;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    for (std::size_t j = 0; j < proposals.size(); ++j) {
      if (i == j) continue;
      const bool positive = matches_ground_truth_pair(proposals, i, j, gt);
      (positive ? positives : negatives).push_back({i, j, positive ? 1.0 : 0.0});
    }
  }
  std::vector<PairSample> out;
  for (std::size_t k = 0; k < positives.size() && out.size() < batch; ++k) out.push_back(positives[k]);
  const std::size_t want = std::min(batch - out.size(), negatives.size());
  for (std::size_t k : rng.sample_without_replacement(negatives.size(), want)) out.push_back(negatives[k]);
  return out;
}

}  // namespace sgg
