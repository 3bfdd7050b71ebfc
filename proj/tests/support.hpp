#pragma once

// Random generators shared by the unit tests and the acceptance binary.

#include <cstddef>
#include <cstdint>
#include <set>
#include <vector>

#include "sgg/sgg.hpp"

namespace sgg::gen {

inline Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  return sgg::random_matrix(r, c, scale, rng);
}

inline std::vector<double> random_distribution(std::size_t n, Rng& rng) {
  std::vector<double> p(n);
  double sum = 0.0;
  for (double& v : p) sum += v = 0.05 + rng.uniform();
  for (double& v : p) v /= sum;
  return p;
}

inline std::vector<double> one_hot(std::size_t n, std::size_t k) {
  std::vector<double> p(n, 0.0);
  p.at(k) = 1.0;
  return p;
}

inline Box random_box(Rng& rng, double extent = 100.0) {
  const double w = rng.uniform(5.0, 40.0), h = rng.uniform(5.0, 40.0);
  return {rng.uniform(0.0, extent - w), rng.uniform(0.0, extent - h), w, h};
}

/// `n` distinct relations over `n_objects` objects, no self-loops.
inline HeteroGraph random_hetero_graph(std::size_t n_objects, std::size_t n_relations, Rng& rng) {
  HeteroGraph g{n_objects, {}};
  std::vector<std::pair<std::size_t, std::size_t>> all;
  for (std::size_t i = 0; i < n_objects; ++i)
    for (std::size_t j = 0; j < n_objects; ++j)
      if (i != j) all.emplace_back(i, j);
  for (std::size_t k : rng.sample_without_replacement(all.size(), std::min(n_relations, all.size()))) {
    g.relations.push_back(all[k]);
  }
  return g;
}

inline std::vector<ObjectProposal> random_proposals(std::size_t n, std::size_t d, std::size_t num_classes, Rng& rng) {
  std::vector<ObjectProposal> out(n);
  for (auto& p : out) {
    p.box = random_box(rng, 400.0);
    p.feature.resize(d);
    for (double& v : p.feature) v = rng.normal();
    p.class_dist = random_distribution(num_classes, rng);
  }
  return out;
}

/// Small ground truth with random boxes and triplets.
inline GroundTruthGraph random_ground_truth(std::size_t n_objects, std::size_t n_triplets, std::size_t num_classes,
                                            std::size_t num_predicates, Rng& rng) {
  GroundTruthGraph g;
  for (std::size_t i = 0; i < n_objects; ++i) {
    g.objects.push_back({random_box(rng), static_cast<int>(rng.below(num_classes)), {}});
  }
  const HeteroGraph h = random_hetero_graph(n_objects, n_triplets, rng);
  for (const auto& [s, o] : h.relations) g.triplets.push_back({s, static_cast<int>(rng.below(num_predicates)), o});
  return g;
}

/// A prediction near `gt`: boxes jittered, some extra boxes, labels and
/// predicates right with probability `p_right`.
inline SceneGraph noisy_prediction(const GroundTruthGraph& gt, std::size_t num_classes, std::size_t num_predicates,
                                   double p_right, std::size_t extra_objects, Rng& rng) {
  SceneGraph g;
  for (const auto& o : gt.objects) {
    ObjectProposal p;
    p.box = {o.box.x + rng.uniform(-6.0, 6.0), o.box.y + rng.uniform(-6.0, 6.0), o.box.w, o.box.h};
    const std::size_t label = rng.bernoulli(p_right) ? static_cast<std::size_t>(o.label) : rng.below(num_classes);
    p.class_dist = random_distribution(num_classes, rng);
    p.class_dist[label] += 2.0;
    for (double& v : p.class_dist) v /= 3.0;
    g.objects.push_back(std::move(p));
  }
  for (std::size_t k = 0; k < extra_objects; ++k) {
    ObjectProposal p;
    p.box = random_box(rng);
    p.class_dist = random_distribution(num_classes, rng);
    g.objects.push_back(std::move(p));
  }
  const std::size_t n = g.objects.size();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& t : gt.triplets) pairs.emplace_back(t.subject, t.object);
  for (std::size_t k = 0; k < 3; ++k) {
    const std::size_t s = rng.below(n), o = rng.below(n);
    if (s != o) pairs.emplace_back(s, o);
  }
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& [s, o] : pairs) {
    if (!seen.insert({s, o}).second) continue;
    RelationEdge e;
    e.subject = s;
    e.object = o;
    std::size_t label = rng.below(num_predicates);
    for (const auto& t : gt.triplets)
      if (t.subject == s && t.object == o && rng.bernoulli(p_right)) label = static_cast<std::size_t>(t.predicate);
    e.predicate_dist = random_distribution(num_predicates, rng);
    e.predicate_dist[label] += 2.0;
    for (double& v : e.predicate_dist) v /= 3.0;
    g.edges.push_back(std::move(e));
  }
  return g;
}

inline std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
  return rng.sample_without_replacement(n, n);
}

}  // namespace sgg::gen
