#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sgg/graph/scene_graph.hpp"
#include "sgg/metrics.hpp"
#include "sgg/rng.hpp"

namespace sgg {

enum class PerturbTarget {
  WithoutRelationships,  // objects in no triplet
  WithRelationships,     // objects in at least one triplet
  Both,
};

inline const char* target_name(PerturbTarget t) {
  switch (t) {
    case PerturbTarget::WithoutRelationships: return "without";
    case PerturbTarget::WithRelationships: return "with";
    case PerturbTarget::Both: return "both";
  }
  return "?";
}

inline PerturbTarget parse_target(const std::string& s) {
  if (s == "without") return PerturbTarget::WithoutRelationships;
  if (s == "with") return PerturbTarget::WithRelationships;
  if (s == "both") return PerturbTarget::Both;
  throw InputError("unknown perturbation target '" + s + "' (expected without, with or both)");
}

struct PerturbSpec {
  PerturbTarget target = PerturbTarget::Both;
  double ratio = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(ratio > 0.0 && ratio <= 1.0)) throw InputError("PerturbSpec: ratio must lie in (0, 1]");
  }
};

struct PerturbResult {
  SceneGraph graph;
  std::vector<std::size_t> perturbed;  // indices of relabelled objects
  bool applicable = true;              // false when the target set is empty
};

/// The ground truth re-expressed as a one-hot prediction.
inline SceneGraph as_prediction(const GroundTruthGraph& gt, std::size_t num_classes, std::size_t num_predicates) {
  SceneGraph g;
  for (const auto& o : gt.objects) {
    ObjectProposal p;
    p.box = o.box;
    p.class_dist.assign(num_classes, 0.0);
    p.class_dist.at(static_cast<std::size_t>(o.label)) = 1.0;
    p.attributes = o.attributes;
    g.objects.push_back(std::move(p));
  }
  // One edge per ordered pair; a pair annotated with several predicates keeps
  // the first one.
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& t : gt.triplets) {
    if (!seen.insert({t.subject, t.object}).second) continue;
    RelationEdge e;
    e.subject = t.subject;
    e.object = t.object;
    e.predicate_dist.assign(num_predicates, 0.0);
    e.predicate_dist.at(static_cast<std::size_t>(t.predicate)) = 1.0;
    g.edges.push_back(std::move(e));
  }
  return g;
}

/// Ground truth as a prediction with floor(ratio * |target set|) objects of
/// the target set, drawn without replacement, relabelled uniformly among the
/// other classes.
inline PerturbResult perturb(const GroundTruthGraph& gt, std::size_t num_classes, std::size_t num_predicates,
                             const PerturbSpec& spec) {
  spec.validate();
  if (num_classes < 2) throw InputError("perturb: need at least 2 object classes");
  validate(gt, num_classes, num_predicates);
  PerturbResult out;
  out.graph = as_prediction(gt, num_classes, num_predicates);
  const auto degree = object_degrees(gt);
  std::vector<std::size_t> targets;
  for (std::size_t i = 0; i < gt.objects.size(); ++i) {
    const bool connected = degree[i] > 0;
    if (spec.target == PerturbTarget::Both || (spec.target == PerturbTarget::WithRelationships) == connected) {
      targets.push_back(i);
    }
  }
  if (targets.empty()) {
    out.applicable = false;
    return out;
  }
  const auto count = static_cast<std::size_t>(std::floor(spec.ratio * static_cast<double>(targets.size())));
  Rng rng(spec.seed);
  for (std::size_t pick : rng.sample_without_replacement(targets.size(), count)) out.perturbed.push_back(targets[pick]);
  for (std::size_t i : out.perturbed) {
    const auto truth = static_cast<std::size_t>(gt.objects[i].label);
    std::size_t wrong = rng.below(num_classes - 1);
    if (wrong >= truth) ++wrong;
    auto& dist = out.graph.objects[i].class_dist;
    std::fill(dist.begin(), dist.end(), 0.0);
    dist[wrong] = 1.0;
  }
  return out;
}

struct StudyCell {
  PerturbTarget target = PerturbTarget::Both;
  double ratio = 0.0;
  double sggen = 0.0;       // mean recall x 100 over applicable graphs
  double sggen_plus = 0.0;
  std::size_t graphs = 0;   // graphs contributing to the SGGen+ mean
};

struct PerturbationStudy {
  double none_sggen = 100.0;
  double none_sggen_plus = 100.0;
  std::size_t k = 0;
  std::vector<StudyCell> cells;
};

namespace detail {

struct MeanAcc {
  double sum = 0.0;
  std::size_t n = 0;
  void add(const Recall& r) {
    if (!r.applicable) return;
    sum += r.value;
    ++n;
  }
  double percent() const { return n ? 100.0 * sum / static_cast<double>(n) : 0.0; }
};

}  // namespace detail

/// SGGen and SGGen+ (x100, at the largest configured K) for the unperturbed
/// corpus and for every (target, ratio) cell. Graph i is perturbed with seed
/// `seed ^ i`.
inline PerturbationStudy perturbation_study(const std::vector<GroundTruthGraph>& corpus, std::size_t num_classes,
                                            std::size_t num_predicates, const std::vector<PerturbTarget>& targets,
                                            const std::vector<double>& ratios, std::uint64_t seed,
                                            const MatchConfig& config = {}) {
  if (corpus.empty()) throw InputError("perturbation_study: empty corpus");
  config.validate();
  const std::size_t k = config.max_k();
  const MatchConfig cfg{config.iou_threshold, {k}};
  PerturbationStudy study;
  study.k = k;
  {
    detail::MeanAcc s, sp;
    for (const auto& gt : corpus) {
      const SceneGraph pred = as_prediction(gt, num_classes, num_predicates);
      s.add(sggen(pred, gt, cfg).at(k));
      sp.add(sggen_plus(pred, gt, cfg).recall.at(k));
    }
    study.none_sggen = s.percent();
    study.none_sggen_plus = sp.percent();
  }
  for (PerturbTarget target : targets) {
    for (double ratio : ratios) {
      detail::MeanAcc s, sp;
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto res = perturb(corpus[i], num_classes, num_predicates, {target, ratio, seed ^ i});
        if (!res.applicable) continue;
        s.add(sggen(res.graph, corpus[i], cfg).at(k));
        sp.add(sggen_plus(res.graph, corpus[i], cfg).recall.at(k));
      }
      study.cells.push_back({target, ratio, s.percent(), sp.percent(), sp.n});
    }
  }
  return study;
}

inline nlohmann::json to_json(const PerturbationStudy& s) {
  using nlohmann::json;
  json cells = json::array();
  for (const auto& c : s.cells) {
    cells.push_back({{"target", target_name(c.target)},
                     {"ratio", c.ratio},
                     {"sggen", c.sggen},
                     {"sggen_plus", c.sggen_plus},
                     {"graphs", c.graphs}});
  }
  return {{"k", s.k}, {"none", {{"sggen", s.none_sggen}, {"sggen_plus", s.none_sggen_plus}}}, {"cells", cells}};
}

/// Two-row table: perturbation type/ratio header, SGGen and SGGen+ rows.
inline std::string to_table(const PerturbationStudy& s) {
  std::string type = "Perturb Type ", ratio = "Perturb Ratio", sg = "SGGen        ", sgp = "SGGen+       ";
  char buf[32];
  auto col = [&](const char* t, double r, double a, double b) {
    std::snprintf(buf, sizeof buf, " %8s", t);
    type += buf;
    std::snprintf(buf, sizeof buf, " %7.0f%%", 100.0 * r);
    ratio += buf;
    std::snprintf(buf, sizeof buf, " %8.1f", a);
    sg += buf;
    std::snprintf(buf, sizeof buf, " %8.1f", b);
    sgp += buf;
  };
  col("none", 0.0, s.none_sggen, s.none_sggen_plus);
  for (const auto& c : s.cells) col(target_name(c.target), c.ratio, c.sggen, c.sggen_plus);
  return type + "\n" + ratio + "\n" + sg + "\n" + sgp + "\n";
}

}  // namespace sgg
