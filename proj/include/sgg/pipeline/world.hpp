#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include "sgg/graph/scene_graph.hpp"
#include "sgg/numerics/matrix.hpp"
#include "sgg/rng.hpp"

namespace sgg {

struct WorldConfig {
  std::size_t num_classes = 8;
  std::size_t num_predicates = 6;
  std::size_t feature_dim = 16;
  double planted_fraction = 0.2;      // share of ordered class pairs that may relate
  double relation_probability = 0.9;  // edge probability for a planted ordered pair
  double predicate_peak = 0.9;        // mass on the pair's dominant predicate
  double feature_noise = 0.5;
  double label_softening = 0.1;       // proposal class_dist puts 1 - eps on its peak
  double label_noise = 0.0;           // chance a proposal confuses its class with another
  double confusion_share = 0.55;      // share of the peak mass the wrong class takes then
  std::size_t min_objects = 6;
  std::size_t max_objects = 10;
  double image_size = 400.0;
  double min_box = 40.0;
  double max_box = 80.0;

  void validate() const {
    if (num_classes < 2 || num_predicates < 1) throw InputError("WorldConfig: need >= 2 classes and >= 1 predicate");
    if (feature_dim == 0) throw InputError("WorldConfig: feature_dim must be positive");
    if (min_objects < 2 || max_objects < min_objects) throw InputError("WorldConfig: bad object count range");
    if (!(label_softening >= 0.0 && label_softening < 1.0)) throw InputError("WorldConfig: label_softening in [0, 1)");
    if (!(label_noise >= 0.0 && label_noise <= 1.0)) throw InputError("WorldConfig: label_noise in [0, 1]");
    if (!(confusion_share >= 0.0 && confusion_share <= 1.0)) throw InputError("WorldConfig: confusion_share in [0, 1]");
    if (!(min_box > 0.0 && max_box >= min_box && image_size > max_box)) throw InputError("WorldConfig: bad box sizes");
  }
};

/// Stand-in for dataset regularities: which ordered class pairs relate, with
/// which predicate, and what a class looks like in feature space.
struct SyntheticWorld {
  WorldConfig config;
  Matrix cooccurrence;     // C x C, P(relation | subject class, object class)
  Matrix predicate_table;  // (C * C) x P, row subject * C + object
  Matrix class_means;      // C x d

  std::vector<double> predicate_dist(std::size_t subject_class, std::size_t object_class) const {
    return predicate_table.row_copy(subject_class * config.num_classes + object_class);
  }

  bool planted(std::size_t subject_class, std::size_t object_class) const {
    return cooccurrence(subject_class, object_class) > 0.0;
  }

  /// Random prior: a `planted_fraction` share of ordered class pairs (off the
  /// diagonal) relate with `relation_probability`; each such pair has one
  /// dominant predicate.
  static SyntheticWorld planted_prior(const WorldConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    SyntheticWorld w;
    w.config = cfg;
    const std::size_t c = cfg.num_classes, p = cfg.num_predicates;
    w.cooccurrence = Matrix(c, c);
    w.predicate_table = Matrix(c * c, p);
    for (std::size_t a = 0; a < c; ++a) {
      for (std::size_t b = 0; b < c; ++b) {
        if (a != b && rng.bernoulli(cfg.planted_fraction)) w.cooccurrence(a, b) = cfg.relation_probability;
        const std::size_t dominant = rng.below(p);
        for (std::size_t k = 0; k < p; ++k) {
          w.predicate_table(a * c + b, k) =
              p == 1 ? 1.0 : (k == dominant ? cfg.predicate_peak : (1.0 - cfg.predicate_peak) / static_cast<double>(p - 1));
        }
      }
    }
    w.class_means = Matrix(c, cfg.feature_dim);
    for (double& v : w.class_means.data()) v = rng.normal();
    return w;
  }
};

struct Instance {
  std::vector<ObjectProposal> proposals;  // index-aligned with gt.objects
  GroundTruthGraph gt;
  std::vector<std::size_t> classes;
};

namespace detail {

inline std::size_t sample_index(const std::vector<double>& dist, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t k = 0; k < dist.size(); ++k) {
    acc += dist[k];
    if (u < acc) return k;
  }
  return dist.size() - 1;
}

inline ObjectProposal make_proposal(const SyntheticWorld& w, std::size_t cls, const Box& box, Rng& rng) {
  const auto& cfg = w.config;
  ObjectProposal p;
  p.box = box;
  p.feature.resize(cfg.feature_dim);
  for (std::size_t k = 0; k < cfg.feature_dim; ++k) p.feature[k] = w.class_means(cls, k) + cfg.feature_noise * rng.normal();
  p.class_dist.assign(cfg.num_classes, cfg.label_softening / static_cast<double>(cfg.num_classes - 1));
  p.class_dist[cls] = 1.0 - cfg.label_softening;
  if (cfg.label_noise > 0.0 && rng.bernoulli(cfg.label_noise)) {
    std::size_t other = rng.below(cfg.num_classes - 1);
    if (other >= cls) ++other;
    p.class_dist[other] = (1.0 - cfg.label_softening) * cfg.confusion_share;
    p.class_dist[cls] = (1.0 - cfg.label_softening) * (1.0 - cfg.confusion_share) +
                        cfg.label_softening / static_cast<double>(cfg.num_classes - 1);
  }
  return p;
}

inline Box random_box(const WorldConfig& cfg, Rng& rng) {
  const double w = rng.uniform(cfg.min_box, cfg.max_box);
  const double h = rng.uniform(cfg.min_box, cfg.max_box);
  return {rng.uniform(0.0, cfg.image_size - w), rng.uniform(0.0, cfg.image_size - h), w, h};
}

}  // namespace detail

/// Samples classes uniformly, places random boxes, draws each ordered pair's
/// relationship from the co-occurrence prior and its predicate from the pair
/// table. Proposals sit exactly on the ground-truth boxes.
inline Instance generate_instance(const SyntheticWorld& w, std::size_t n_objects, std::uint64_t seed) {
  if (n_objects < 2) throw InputError("generate_instance: need at least 2 objects");
  const auto& cfg = w.config;
  Rng rng(seed);
  Instance inst;
  for (std::size_t i = 0; i < n_objects; ++i) {
    const std::size_t cls = rng.below(cfg.num_classes);
    const Box box = detail::random_box(cfg, rng);
    inst.classes.push_back(cls);
    inst.gt.objects.push_back({box, static_cast<int>(cls), {}});
    inst.proposals.push_back(detail::make_proposal(w, cls, box, rng));
  }
  for (std::size_t i = 0; i < n_objects; ++i) {
    for (std::size_t j = 0; j < n_objects; ++j) {
      if (i == j) continue;
      if (!rng.bernoulli(w.cooccurrence(inst.classes[i], inst.classes[j]))) continue;
      const auto pred = detail::sample_index(w.predicate_dist(inst.classes[i], inst.classes[j]), rng);
      inst.gt.triplets.push_back({i, static_cast<int>(pred), j});
    }
  }
  return inst;
}

/// Object count for the instance stream, uniform in [min_objects, max_objects].
inline std::size_t sample_object_count(const WorldConfig& cfg, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0xC0));
  return cfg.min_objects + rng.below(cfg.max_objects - cfg.min_objects + 1);
}

/// Ground truth with a planted degree mix: `n_connected` objects joined by
/// random triplets so that each has degree >= 1, plus `n_isolated` objects in
/// no triplet.
inline GroundTruthGraph generate_degree_mix(const WorldConfig& cfg, std::size_t n_connected, std::size_t n_isolated,
                                            std::uint64_t seed) {
  if (n_connected < 2) throw InputError("generate_degree_mix: need >= 2 connected objects");
  Rng rng(seed);
  GroundTruthGraph g;
  for (std::size_t i = 0; i < n_connected + n_isolated; ++i) {
    g.objects.push_back({detail::random_box(cfg, rng), static_cast<int>(rng.below(cfg.num_classes)), {}});
  }
  std::set<std::pair<std::size_t, std::size_t>> used;
  auto add = [&](std::size_t s, std::size_t o) {
    if (s == o || !used.insert({s, o}).second) return;
    g.triplets.push_back({s, static_cast<int>(rng.below(cfg.num_predicates)), o});
  };
  for (std::size_t i = 0; i < n_connected; ++i) {
    std::size_t j = rng.below(n_connected - 1);
    if (j >= i) ++j;
    add(i, j);
  }
  return g;
}

}  // namespace sgg
