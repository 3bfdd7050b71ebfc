#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "sgg/graph/box.hpp"
#include "sgg/metrics.hpp"
#include "sgg/pipeline/model.hpp"
#include "sgg/pipeline/world.hpp"

namespace sgg {

/// Fixed instance pools drawn from the world; stream 1 trains, stream 2
/// evaluates, so the two never share a seed.
inline std::vector<Instance> instance_pool(const SyntheticWorld& world, std::size_t count, std::uint64_t seed,
                                           std::uint64_t stream) {
  std::vector<Instance> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t s = derive_seed(derive_seed(seed, stream), i);
    out.push_back(generate_instance(world, sample_object_count(world.config, s), s));
  }
  return out;
}

/// Each proposal takes the ground-truth object of highest IoU above 0.5
/// (lowest index on ties), or no label.
inline std::vector<std::optional<std::size_t>> assign_object_targets(const std::vector<ObjectProposal>& proposals,
                                                                     const GroundTruthGraph& gt) {
  std::vector<std::optional<std::size_t>> out(proposals.size());
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    double best = 0.5;
    for (std::size_t g = 0; g < gt.objects.size(); ++g) {
      const double iou = box_iou(proposals[i].box, gt.objects[g].box);
      if (iou > best) {
        best = iou;
        out[i] = g;
      }
    }
  }
  return out;
}

/// Predicate of the first ground-truth triplet whose box pair overlaps the
/// candidate by at least kPositivePairIou; unlabelled otherwise.
inline std::vector<std::optional<std::size_t>> assign_predicate_targets(const std::vector<ObjectProposal>& proposals,
                                                                        const std::vector<ScoredPair>& pairs,
                                                                        const GroundTruthGraph& gt) {
  std::vector<std::optional<std::size_t>> out(pairs.size());
  for (std::size_t e = 0; e < pairs.size(); ++e) {
    const BoxPair p{proposals[pairs[e].subject].box, proposals[pairs[e].object].box};
    for (const auto& t : gt.triplets) {
      if (pair_iou(p, BoxPair{gt.objects[t.subject].box, gt.objects[t.object].box}) >= kPositivePairIou) {
        out[e] = static_cast<std::size_t>(t.predicate);
        break;
      }
    }
  }
  return out;
}

/// repn_loss + classification_losses for one instance, on `tape`.
inline Var instance_loss(Tape& tape, const PipelineConfig& c, const ModelVars& v, const Instance& inst, Rng& rng) {
  const auto& proposals = inst.proposals;
  std::vector<ScoredPair> positives;
  for (std::size_t i = 0; i < proposals.size(); ++i)
    for (std::size_t j = 0; j < proposals.size(); ++j)
      if (i != j && matches_ground_truth_pair(proposals, i, j, inst.gt)) positives.push_back({i, j, 0.0});
  const ForwardTrace t = forward_on_tape(tape, c, v, proposals, rng.next_seed(), positives);

  const auto samples = sample_training_pairs(proposals, inst.gt, c.repn_batch, rng);
  std::vector<std::size_t> rows, cols;
  std::vector<double> labels;
  for (const auto& s : samples) {
    rows.push_back(s.subject);
    cols.push_back(s.object);
    labels.push_back(s.label);
  }

  std::vector<std::optional<std::size_t>> object_labels;
  for (const auto& g : assign_object_targets(proposals, inst.gt)) {
    object_labels.push_back(g ? std::optional<std::size_t>(inst.gt.objects[*g].label) : std::nullopt);
  }
  const auto predicate_labels = assign_predicate_targets(proposals, t.pairs, inst.gt);
  Var loss = classification_losses(t.object_logits, t.predicate_logits, object_labels, predicate_labels);
  if (!samples.empty()) loss = add(loss, repn_loss(gather_elements(t.relatedness, rows, cols), labels));
  return loss;
}

/// One SGD step on the mean loss of `batch`. Returns the loss before the step.
inline double train_step(const PipelineConfig& c, ModelParams& params, const std::vector<const Instance*>& batch,
                         Rng& rng) {
  if (batch.empty()) throw InputError("train_step: empty batch");
  Tape tape;
  const ModelVars v = bind(tape, params, true);
  std::optional<Var> total;
  for (const Instance* inst : batch) {
    const Var l = instance_loss(tape, c, v, *inst, rng);
    total = total ? add(*total, l) : l;
  }
  const Var loss = scale(*total, 1.0 / static_cast<double>(batch.size()));
  const double value = loss.value()(0, 0);
  if (!std::isfinite(value)) throw NumericalError("train_step: loss is not finite");
  tape.backward(loss);
  sgd_step(params, v, tape, c.learning_rate);
  return value;
}

/// Pruning seed for evaluation image i (only the random-pruning variant uses it).
inline std::uint64_t eval_pruning_seed(std::uint64_t seed, std::size_t i) { return derive_seed(derive_seed(seed, 3), i); }

inline MetricReport evaluate_model(const PipelineConfig& c, const ModelParams& params,
                                   const std::vector<Instance>& instances, const MatchConfig& match = {}) {
  std::vector<MetricReport> reports;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const SceneGraph g = forward(c, params, instances[i].proposals, eval_pruning_seed(c.seed, i));
    reports.push_back(evaluate(g, instances[i].gt, match));
  }
  return aggregate(reports);
}

/// Area under the ROC curve by the rank-sum statistic; ties count one half.
inline double roc_auc(const std::vector<double>& scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw ShapeError("roc_auc: score and label counts differ");
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (positive[order[k]]) {
        rank_sum += mid;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw InputError("roc_auc: need both positive and negative pairs");
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

/// Relatedness AUC over every ordered pair of every instance, positives being
/// pairs whose classes the world planted.
inline double pair_ranking_auc(const ModelParams& params, const SyntheticWorld& world,
                               const std::vector<Instance>& instances) {
  std::vector<double> scores;
  std::vector<bool> labels;
  for (const auto& inst : instances) {
    const Matrix s = relatedness_matrix(params.repn, class_dist_matrix(inst.proposals));
    for (std::size_t i = 0; i < inst.classes.size(); ++i) {
      for (std::size_t j = 0; j < inst.classes.size(); ++j) {
        if (i == j) continue;
        scores.push_back(s(i, j));
        labels.push_back(world.planted(inst.classes[i], inst.classes[j]));
      }
    }
  }
  return roc_auc(scores, labels);
}

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;  // mean over the epoch's steps
  double sggen = 0.0;       // held-out, at the smallest K
  double sggen_plus = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochStats> trajectory;
  double auc = 0.0;
  MetricReport final_report;
};

/// Trains every parameter jointly with plain SGD over a fixed instance pool.
/// Epoch 0 in the trajectory is the untrained model.
inline TrainResult train_toy(const PipelineConfig& c, const SyntheticWorld& world) {
  c.validate();
  const auto train = instance_pool(world, c.train_instances, c.seed, 1);
  const auto held_out = instance_pool(world, c.eval_instances, c.seed, 2);
  TrainResult r;
  r.params = init_params(c, derive_seed(c.seed, 0));
  Rng rng(derive_seed(c.seed, 4));
  const MatchConfig match;
  const std::size_t k = match.ks.front();
  auto record = [&](std::size_t epoch, double loss) {
    const MetricReport m = evaluate_model(c, r.params, held_out, match);
    r.trajectory.push_back({epoch, loss, m.sggen.at(k).value, m.sggen_plus.at(k).value});
    r.final_report = m;
  };
  record(0, 0.0);
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t epoch = 1; epoch <= c.epochs; ++epoch) {
    // Fisher-Yates with the portable generator.
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t b = 0; b < order.size(); b += c.batch_size) {
      std::vector<const Instance*> batch;
      for (std::size_t i = b; i < std::min(order.size(), b + c.batch_size); ++i) batch.push_back(&train[order[i]]);
      sum += train_step(c, r.params, batch, rng);
      ++steps;
    }
    record(epoch, sum / static_cast<double>(steps));
  }
  if (!held_out.empty()) r.auc = pair_ranking_auc(r.params, world, held_out);
  return r;
}

inline TrainResult train_toy(const PipelineConfig& c) {
  return train_toy(c, SyntheticWorld::planted_prior(c.world, c.world_seed));
}

inline json to_json(const TrainResult& r) {
  json traj = json::array();
  for (const auto& e : r.trajectory) {
    traj.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"sggen", e.sggen}, {"sggen_plus", e.sggen_plus}});
  }
  return {{"trajectory", traj}, {"auc", r.auc}, {"report", to_json(r.final_report)}};
}

}  // namespace sgg
