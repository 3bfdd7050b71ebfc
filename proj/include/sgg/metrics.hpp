#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "sgg/graph/box.hpp"
#include "sgg/graph/scene_graph.hpp"

namespace sgg {

struct MatchConfig {
  double iou_threshold = 0.5;  // a match needs IoU strictly above this
  std::vector<std::size_t> ks{50, 100};

  void validate() const {
    if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) throw InputError("MatchConfig: iou_threshold must lie in (0, 1]");
    if (ks.empty()) throw InputError("MatchConfig: ks is empty");
    for (std::size_t k : ks)
      if (k == 0) throw InputError("MatchConfig: K must be >= 1");
  }

  std::size_t max_k() const { return *std::max_element(ks.begin(), ks.end()); }
};

struct RankedTriplet {
  std::size_t edge = 0;
  std::size_t subject = 0;
  std::size_t object = 0;
  int subject_label = 0;
  int predicate = 0;
  int object_label = 0;
  double score = 0.0;
};

enum class RankBy {
  ScoreProduct,    // subject conf * predicate conf * object conf
  PredicateScore,  // predicate conf alone
};

namespace detail {

inline double confidence(const std::vector<double>& dist) {
  return dist.empty() ? 1.0 : *std::max_element(dist.begin(), dist.end());
}

}  // namespace detail

/// One triplet per edge, labelled by argmax, sorted by descending score with
/// ties broken by (subject, object, predicate).
inline std::vector<RankedTriplet> rank_triplets(const SceneGraph& pred, RankBy by = RankBy::ScoreProduct) {
  std::vector<RankedTriplet> out;
  out.reserve(pred.edges.size());
  for (std::size_t e = 0; e < pred.edges.size(); ++e) {
    const auto& edge = pred.edges[e];
    if (edge.predicate_dist.empty() && pred.predicate_labels.empty()) continue;
    RankedTriplet t;
    t.edge = e;
    t.subject = edge.subject;
    t.object = edge.object;
    t.subject_label = object_label(pred, edge.subject);
    t.object_label = object_label(pred, edge.object);
    t.predicate = predicate_label(pred, e);
    const double p = detail::confidence(edge.predicate_dist);
    t.score = by == RankBy::PredicateScore
                  ? p
                  : detail::confidence(pred.objects[edge.subject].class_dist) * p *
                        detail::confidence(pred.objects[edge.object].class_dist);
    out.push_back(t);
  }
  std::sort(out.begin(), out.end(), [](const RankedTriplet& a, const RankedTriplet& b) {
    if (a.score != b.score) return a.score > b.score;
    return std::tie(a.subject, a.object, a.predicate) < std::tie(b.subject, b.object, b.predicate);
  });
  return out;
}

/// One-to-one prediction -> ground-truth object assignment.
struct Assignment {
  std::vector<std::optional<std::size_t>> pred_to_gt;
  std::size_t matched = 0;
};

/// The two assignments used for scoring: `labeled` requires equal class
/// labels (object singletons and triplets), `localized` ignores labels
/// (endpoint grounding for predicate singletons).
struct ObjectMatching {
  Assignment labeled;
  Assignment localized;
};

namespace detail {

inline Assignment greedy_assign(const SceneGraph& pred, const GroundTruthGraph& gt, double iou_threshold,
                                bool require_label) {
  std::vector<std::size_t> order(pred.objects.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return confidence(pred.objects[a].class_dist) > confidence(pred.objects[b].class_dist);
  });
  Assignment out;
  out.pred_to_gt.assign(pred.objects.size(), std::nullopt);
  std::vector<bool> taken(gt.objects.size(), false);
  for (std::size_t i : order) {
    const int label = object_label(pred, i);
    std::optional<std::size_t> best;
    double best_iou = iou_threshold;
    for (std::size_t g = 0; g < gt.objects.size(); ++g) {
      if (taken[g] || (require_label && gt.objects[g].label != label)) continue;
      const double iou = box_iou(pred.objects[i].box, gt.objects[g].box);
      if (iou > best_iou) {
        best_iou = iou;
        best = g;
      }
    }
    if (best) {
      taken[*best] = true;
      out.pred_to_gt[i] = best;
      ++out.matched;
    }
  }
  return out;
}

/// Ground-truth triplets hit by the first `k` ranked triplets. A triplet
/// counts once; endpoints are grounded through `assignment`, and labels are
/// checked only for the predicate (the assignment carries any object-label
/// requirement).
inline std::size_t count_triplet_hits(const std::vector<RankedTriplet>& ranked, std::size_t k,
                                      const Assignment& assignment, const GroundTruthGraph& gt) {
  std::vector<bool> hit(gt.triplets.size(), false);
  std::size_t count = 0;
  const std::size_t limit = std::min(k, ranked.size());
  for (std::size_t r = 0; r < limit; ++r) {
    const auto& t = ranked[r];
    const auto gs = assignment.pred_to_gt[t.subject];
    const auto go = assignment.pred_to_gt[t.object];
    if (!gs || !go) continue;
    for (std::size_t g = 0; g < gt.triplets.size(); ++g) {
      const auto& gtt = gt.triplets[g];
      if (hit[g] || gtt.subject != *gs || gtt.object != *go || gtt.predicate != t.predicate) continue;
      hit[g] = true;
      ++count;
      break;
    }
  }
  return count;
}

}  // namespace detail

/// Greedy matching in descending predicted-object confidence (ties by index):
/// each prediction takes the unmatched ground-truth object of highest IoU
/// above the threshold, among those with the same label for `labeled`.
inline ObjectMatching match_objects(const SceneGraph& pred, const GroundTruthGraph& gt, const MatchConfig& config) {
  config.validate();
  return {detail::greedy_assign(pred, gt, config.iou_threshold, true),
          detail::greedy_assign(pred, gt, config.iou_threshold, false)};
}

/// A recall value. Not applicable when the ground truth has nothing to
/// recall; the value is then 1 by convention.
struct Recall {
  double value = 1.0;
  bool applicable = false;

  bool operator==(const Recall&) const = default;
};

using RecallAtK = std::map<std::size_t, Recall>;

struct SggenPlusCounts {
  std::size_t c_o = 0;  // objects localized and labelled correctly
  std::size_t c_p = 0;  // predicates correct on localized endpoints
  std::size_t c_t = 0;  // full triplets, as SGGen
  std::size_t c_a = 0;  // <object, attribute> pairs
  std::size_t n = 0;    // |objects| + 2 |triplets| + |attribute pairs|

  bool operator==(const SggenPlusCounts&) const = default;
};

struct SggenPlusResult {
  RecallAtK recall;
  std::map<std::size_t, SggenPlusCounts> counts;
};

namespace detail {

inline Recall ratio(std::size_t num, std::size_t den) {
  if (den == 0) return {1.0, false};
  return {static_cast<double>(num) / static_cast<double>(den), true};
}

inline RecallAtK triplet_recall(const SceneGraph& pred, const GroundTruthGraph& gt, const MatchConfig& config,
                                RankBy rank, bool labeled) {
  const auto match = match_objects(pred, gt, config);
  const auto ranked = rank_triplets(pred, rank);
  RecallAtK out;
  for (std::size_t k : config.ks) {
    out[k] = ratio(count_triplet_hits(ranked, k, labeled ? match.labeled : match.localized, gt), gt.triplets.size());
  }
  return out;
}

}  // namespace detail

/// Triplet recall@K: subject and object localized with correct labels and the
/// predicate correct.
inline RecallAtK sggen(const SceneGraph& pred, const GroundTruthGraph& gt, const MatchConfig& config = {}) {
  return detail::triplet_recall(pred, gt, config, RankBy::ScoreProduct, true);
}

/// (C(O) + C(P) + C(T)) / N, plus C(A) and attribute pairs when present.
/// C(O) and C(A) ignore K; C(P) and C(T) use the top-K ranked triplets.
inline SggenPlusResult sggen_plus(const SceneGraph& pred, const GroundTruthGraph& gt, const MatchConfig& config = {}) {
  const auto match = match_objects(pred, gt, config);
  const auto ranked = rank_triplets(pred, RankBy::ScoreProduct);
  std::size_t c_a = 0, attribute_pairs = 0;
  for (std::size_t g = 0; g < gt.objects.size(); ++g) attribute_pairs += gt.objects[g].attributes.size();
  for (std::size_t i = 0; i < pred.objects.size(); ++i) {
    const auto g = match.labeled.pred_to_gt[i];
    if (!g) continue;
    for (int a : gt.objects[*g].attributes) {
      const auto& have = pred.objects[i].attributes;
      c_a += std::find(have.begin(), have.end(), a) != have.end() ? 1 : 0;
    }
  }
  SggenPlusResult out;
  for (std::size_t k : config.ks) {
    SggenPlusCounts c;
    c.c_o = match.labeled.matched;
    c.c_p = detail::count_triplet_hits(ranked, k, match.localized, gt);
    c.c_t = detail::count_triplet_hits(ranked, k, match.labeled, gt);
    c.c_a = c_a;
    c.n = gt.objects.size() + 2 * gt.triplets.size() + attribute_pairs;
    out.counts[k] = c;
    out.recall[k] = detail::ratio(c.c_o + c.c_p + c.c_t + c.c_a, c.n);
  }
  return out;
}

/// Predicate recall given ground-truth boxes and labels: ranked by predicate
/// confidence, endpoints grounded by localization only.
inline RecallAtK predcls(const SceneGraph& pred, const GroundTruthGraph& gt, const MatchConfig& config = {}) {
  return detail::triplet_recall(pred, gt, config, RankBy::PredicateScore, false);
}

/// Phrase recall given ground-truth boxes: object labels and predicate must be
/// right, ranked by the score product.
inline RecallAtK phrcls(const SceneGraph& pred, const GroundTruthGraph& gt, const MatchConfig& config = {}) {
  return detail::triplet_recall(pred, gt, config, RankBy::ScoreProduct, true);
}

/// Per-metric recall@K, averaged over the applicable images of a corpus, and
/// SGGen+ counts summed over images.
struct MetricReport {
  RecallAtK sggen, sggen_plus, predcls, phrcls;
  std::map<std::size_t, SggenPlusCounts> counts;
  std::size_t images = 0;
};

inline MetricReport evaluate(const SceneGraph& pred, const GroundTruthGraph& gt, const MatchConfig& config = {}) {
  config.validate();
  MetricReport r;
  r.sggen = sggen(pred, gt, config);
  const auto plus = sggen_plus(pred, gt, config);
  r.sggen_plus = plus.recall;
  r.counts = plus.counts;
  r.predcls = predcls(pred, gt, config);
  r.phrcls = phrcls(pred, gt, config);
  r.images = 1;
  return r;
}

/// Mean recall over images where the metric applies (fixed index order).
inline MetricReport aggregate(const std::vector<MetricReport>& reports) {
  MetricReport out;
  auto mean = [&](RecallAtK MetricReport::*field) {
    std::map<std::size_t, std::pair<double, std::size_t>> acc;
    for (const auto& r : reports) {
      for (const auto& [k, rec] : r.*field) {
        auto& a = acc[k];
        if (rec.applicable) {
          a.first += rec.value;
          ++a.second;
        }
      }
    }
    RecallAtK res;
    for (const auto& [k, a] : acc) {
      res[k] = a.second ? Recall{a.first / static_cast<double>(a.second), true} : Recall{1.0, false};
    }
    out.*field = res;
  };
  mean(&MetricReport::sggen);
  mean(&MetricReport::sggen_plus);
  mean(&MetricReport::predcls);
  mean(&MetricReport::phrcls);
  for (const auto& r : reports) {
    for (const auto& [k, c] : r.counts) {
      auto& t = out.counts[k];
      t.c_o += c.c_o;
      t.c_p += c.c_p;
      t.c_t += c.c_t;
      t.c_a += c.c_a;
      t.n += c.n;
    }
    out.images += r.images;
  }
  return out;
}

/// {"sggen":{"50":..,"100":..}, ..., "counts":{...}}; counts are taken at the
/// largest K. Not-applicable recalls are null.
inline nlohmann::json to_json(const MetricReport& r) {
  using nlohmann::json;
  auto recalls = [](const RecallAtK& m) {
    json j = json::object();
    for (const auto& [k, rec] : m) j[std::to_string(k)] = rec.applicable ? json(rec.value) : json(nullptr);
    return j;
  };
  json counts = json::object();
  if (!r.counts.empty()) {
    const auto& c = r.counts.rbegin()->second;
    counts = {{"c_o", c.c_o}, {"c_p", c.c_p}, {"c_t", c.c_t}, {"n", c.n}};
    if (c.c_a) counts["c_a"] = c.c_a;
  }
  return {{"sggen", recalls(r.sggen)},     {"sggen_plus", recalls(r.sggen_plus)},
          {"predcls", recalls(r.predcls)}, {"phrcls", recalls(r.phrcls)},
          {"counts", counts},              {"images", r.images}};
}

inline std::string to_table(const MetricReport& r) {
  std::string out;
  char buf[64];
  out += "metric    ";
  for (const auto& [k, rec] : r.sggen) {
    std::snprintf(buf, sizeof buf, "%9s", ("R@" + std::to_string(k)).c_str());
    out += buf;
  }
  out += "\n";
  auto row = [&](const char* name, const RecallAtK& m) {
    std::snprintf(buf, sizeof buf, "%-10s", name);
    out += buf;
    for (const auto& [k, rec] : m) {
      if (rec.applicable) {
        std::snprintf(buf, sizeof buf, "%9.2f", 100.0 * rec.value);
      } else {
        std::snprintf(buf, sizeof buf, "%9s", "n/a");
      }
      out += buf;
    }
    out += "\n";
  };
  row("SGGen", r.sggen);
  row("SGGen+", r.sggen_plus);
  row("PhrCls", r.phrcls);
  row("PredCls", r.predcls);
  if (!r.counts.empty()) {
    const auto& c = r.counts.rbegin()->second;
    std::snprintf(buf, sizeof buf, "C(O)=%zu C(P)=%zu C(T)=%zu ", c.c_o, c.c_p, c.c_t);
    out += buf;
    if (c.c_a) {
      std::snprintf(buf, sizeof buf, "C(A)=%zu ", c.c_a);
      out += buf;
    }
    std::snprintf(buf, sizeof buf, "N=%zu (K=%zu, %zu images)\n", c.n, r.counts.rbegin()->first, r.images);
    out += buf;
  }
  return out;
}

}  // namespace sgg
