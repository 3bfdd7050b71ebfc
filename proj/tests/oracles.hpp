#pragma once

// Slow, obviously-correct reference computations shared by the unit tests
// and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "sgg/sgg.hpp"

namespace sgg::oracle {

inline std::vector<double> mlp_row(const Mlp2& m, const std::vector<double>& x) {
  std::vector<double> h(m.w1.cols());
  for (std::size_t j = 0; j < h.size(); ++j) {
    double s = m.b1(0, j);
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * m.w1(i, j);
    h[j] = std::max(s, 0.0);
  }
  std::vector<double> out(m.w2.cols());
  for (std::size_t j = 0; j < out.size(); ++j) {
    double s = m.b2(0, j);
    for (std::size_t i = 0; i < h.size(); ++i) s += h[i] * m.w2(i, j);
    out[j] = s;
  }
  return out;
}

/// sigmoid(<phi(p_i), psi(p_j)>) one pair at a time.
inline double relatedness(const RepnParams& p, const std::vector<double>& pi, const std::vector<double>& pj) {
  const auto a = mlp_row(p.phi, pi), b = mlp_row(p.psi, pj);
  double dot = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) dot += a[k] * b[k];
  return 1.0 / (1.0 + std::exp(-dot));
}

/// Selection-sort every directed pair by score, then keep each pair unless a
/// kept one overlaps it by more than `threshold`.
inline std::vector<ScoredPair> pair_nms(const Matrix& s, const std::vector<Box>& boxes, double threshold) {
  const std::size_t n = boxes.size();
  std::vector<ScoredPair> all;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) all.push_back({i, j, s(i, j)});
  for (std::size_t a = 0; a < all.size(); ++a) {
    std::size_t best = a;
    for (std::size_t b = a + 1; b < all.size(); ++b)
      if (all[b].score > all[best].score) best = b;
    std::swap(all[a], all[best]);
  }
  std::vector<ScoredPair> kept;
  for (const auto& p : all) {
    bool keep = true;
    for (const auto& k : kept)
      if (pair_iou({boxes[k.subject], boxes[k.object]}, {boxes[p.subject], boxes[p.object]}) > threshold) keep = false;
    if (keep) kept.push_back(p);
  }
  return kept;
}

// Largest number of one-to-one (prediction, ground truth) pairs with IoU above
// the threshold, and equal labels when asked, by exhaustive search.
inline std::size_t max_matching(const SceneGraph& pred, const GroundTruthGraph& gt, double thr, bool labeled) {
  std::vector<bool> used(gt.objects.size(), false);
  std::function<std::size_t(std::size_t)> go = [&](std::size_t i) -> std::size_t {
    if (i == pred.objects.size()) return 0;
    std::size_t best = go(i + 1);
    for (std::size_t g = 0; g < gt.objects.size(); ++g) {
      if (used[g] || box_iou(pred.objects[i].box, gt.objects[g].box) <= thr) continue;
      if (labeled && object_label(pred, i) != gt.objects[g].label) continue;
      used[g] = true;
      best = std::max(best, 1 + go(i + 1));
      used[g] = false;
    }
    return best;
  };
  return go(0);
}

/// exp(x_ij) / sum over kept j, zero elsewhere and on empty rows.
inline Matrix masked_softmax(const Matrix& x, const std::vector<std::uint8_t>& keep) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j)
      if (keep[i * x.cols() + j]) z += std::exp(x(i, j));
    for (std::size_t j = 0; j < x.cols(); ++j)
      if (keep[i * x.cols() + j]) out(i, j) = std::exp(x(i, j)) / z;
  }
  return out;
}

/// u = w_h . relu(W_a^T [z_i, z_j]) for a single edge.
inline double edge_score(const AttentionHead& h, const std::vector<double>& zi, const std::vector<double>& zj) {
  std::vector<double> x = zi;
  x.insert(x.end(), zj.begin(), zj.end());
  double u = 0.0;
  for (std::size_t k = 0; k < h.w_a.cols(); ++k) {
    double a = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) a += x[i] * h.w_a(i, k);
    u += std::max(a, 0.0) * h.w_h(k, 0);
  }
  return u;
}

/// Attention of one group, one target row at a time from edge_score.
inline Matrix attention(const AttentionHead& h, const Matrix& z_obj, const Matrix& z_rel, const HeteroGraph& g,
                        EdgeGroup group) {
  const GroupLayout l = group_layout(g, group);
  const Matrix& zt = l.target_is_object ? z_obj : z_rel;
  const Matrix& zs = l.source_is_object ? z_obj : z_rel;
  Matrix out(l.n_targets, l.n_sources);
  for (std::size_t t = 0; t < l.n_targets; ++t) {
    std::vector<std::pair<std::size_t, double>> scores;
    for (std::size_t e = 0; e < l.targets.size(); ++e) {
      if (l.targets[e] == t) scores.emplace_back(l.sources[e], edge_score(h, zt.row_copy(t), zs.row_copy(l.sources[e])));
    }
    double m = -1e300, z = 0.0;
    for (const auto& [j, u] : scores) m = std::max(m, u);
    for (const auto& [j, u] : scores) z += std::exp(u - m);
    for (const auto& [j, u] : scores) out(t, j) = std::exp(u - m) / z;
    if (group == EdgeGroup::Skip) out(t, t) = 1.0;
  }
  return out;
}

}  // namespace sgg::oracle
