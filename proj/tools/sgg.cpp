// Command-line front end: evaluate, perturb, pipeline, train-toy.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sgg/sgg.hpp"

namespace fs = std::filesystem;

namespace {

template <class T, class Parse>
std::vector<T> split_list(const std::string& text, Parse parse) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) throw sgg::InputError("empty entry in list '" + text + "'");
    out.push_back(parse(item));
  }
  if (out.empty()) throw sgg::InputError("empty list");
  return out;
}

std::size_t parse_size(const std::string& s) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty() || s[0] == '-') throw sgg::InputError("not a non-negative integer: '" + s + "'");
  return static_cast<std::size_t>(v);
}

double parse_real(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw sgg::InputError("not a number: '" + s + "'");
  return v;
}

// JSON files of a directory in name order, or the single file itself.
std::vector<fs::path> json_files(const fs::path& p) {
  if (!fs::exists(p)) throw sgg::InputError(p.string() + ": no such file or directory");
  if (!fs::is_directory(p)) return {p};
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(p)) {
    if (e.is_regular_file() && e.path().extension() == ".json") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw sgg::InputError(p.string() + ": no .json files");
  return out;
}

void emit_json(const nlohmann::json& j, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << sgg::dump(j);
  } else {
    sgg::write_text_file(path, sgg::dump(j));
  }
}

struct EvaluateArgs {
  std::string pred, gt, vocab, json, ks = "50,100";
  double iou = 0.5;
};

int run_evaluate(const EvaluateArgs& a) {
  const sgg::Vocabulary vocab = sgg::load_vocabulary(a.vocab);
  sgg::MatchConfig match;
  match.iou_threshold = a.iou;
  match.ks = split_list<std::size_t>(a.ks, parse_size);
  match.validate();
  sgg::LoadOptions opts;
  opts.num_classes = vocab.object_classes.size();
  opts.num_predicates = vocab.predicate_classes.size();
  const auto preds = json_files(a.pred);
  const auto gts = json_files(a.gt);
  std::vector<sgg::MetricReport> reports;
  if (fs::is_directory(a.pred) != fs::is_directory(a.gt)) {
    throw sgg::InputError("--pred and --gt must both be files or both be directories");
  }
  if (!fs::is_directory(a.gt)) {
    reports.push_back(sgg::evaluate(sgg::load_scene_graph(preds[0], opts), sgg::load_ground_truth(gts[0], opts), match));
  } else {
    // Pair by file name; every ground-truth file needs a prediction.
    std::map<std::string, fs::path> by_name;
    for (const auto& p : preds) by_name[p.filename().string()] = p;
    for (const auto& g : gts) {
      auto it = by_name.find(g.filename().string());
      if (it == by_name.end()) throw sgg::InputError("no prediction for " + g.filename().string());
      reports.push_back(sgg::evaluate(sgg::load_scene_graph(it->second, opts), sgg::load_ground_truth(g, opts), match));
    }
  }
  const sgg::MetricReport total = sgg::aggregate(reports);
  std::cout << sgg::to_table(total);
  if (!a.json.empty()) emit_json(sgg::to_json(total), a.json);
  return 0;
}

struct PerturbArgs {
  std::string gt, vocab, json, targets = "without,with,both", ratios = "0.2,0.5,1.0";
  std::uint64_t seed = 0;
};

int run_perturb(const PerturbArgs& a) {
  const sgg::Vocabulary vocab = sgg::load_vocabulary(a.vocab);
  sgg::LoadOptions opts;
  opts.num_classes = vocab.object_classes.size();
  opts.num_predicates = vocab.predicate_classes.size();
  std::vector<sgg::GroundTruthGraph> corpus;
  for (const auto& p : json_files(a.gt)) corpus.push_back(sgg::load_ground_truth(p, opts));
  const auto targets = split_list<sgg::PerturbTarget>(a.targets, sgg::parse_target);
  const auto ratios = split_list<double>(a.ratios, parse_real);
  const auto study = sgg::perturbation_study(corpus, opts.num_classes, opts.num_predicates, targets, ratios, a.seed);
  std::cout << sgg::to_table(study);
  if (!a.json.empty()) emit_json(sgg::to_json(study), a.json);
  return 0;
}

struct PipelineArgs {
  std::string proposals, params, config, out;
  std::uint64_t seed = 0;
};

int run_pipeline(const PipelineArgs& a) {
  const auto config = sgg::load_with_path(a.config, [](const nlohmann::json& j) {
    return sgg::pipeline_config_from_json(j);
  });
  sgg::ModelParams params = sgg::init_params(config, 0);
  sgg::load_checkpoint(a.params, params);
  sgg::LoadOptions opts;
  opts.num_classes = config.num_classes;
  const sgg::SceneGraph proposals = sgg::load_scene_graph(a.proposals, opts);
  if (!proposals.edges.empty()) throw sgg::InputError(a.proposals + ": proposals must not carry edges");
  const sgg::SceneGraph out = sgg::forward(config, params, proposals.objects, a.seed);
  emit_json(sgg::to_json(out), a.out);
  return 0;
}

struct TrainArgs {
  std::string config, out, trajectory;
  std::optional<std::uint64_t> seed;
};

int run_train(const TrainArgs& a) {
  sgg::PipelineConfig config;
  if (!a.config.empty()) {
    config = sgg::load_with_path(a.config, [](const nlohmann::json& j) { return sgg::pipeline_config_from_json(j); });
  }
  if (a.seed) config.seed = *a.seed;
  const sgg::TrainResult r = sgg::train_toy(config);
  sgg::save_checkpoint(r.params, a.out);
  for (const auto& e : r.trajectory) {
    std::cout << "epoch " << e.epoch << "  loss " << e.loss << "  sggen@50 " << e.sggen << "  sggen+@50 "
              << e.sggen_plus << "\n";
  }
  std::cout << "relatedness auc " << r.auc << "\n";
  if (!a.trajectory.empty()) emit_json(sgg::to_json(r), a.trajectory);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scene graph generation toolkit"};
  app.require_subcommand(1);

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "score predicted scene graphs against ground truth");
  evaluate->add_option("--pred", ev.pred, "prediction file or directory")->required();
  evaluate->add_option("--gt", ev.gt, "ground-truth file or directory")->required();
  evaluate->add_option("--vocab", ev.vocab, "vocabulary file")->required();
  evaluate->add_option("--iou", ev.iou, "IoU threshold (strict)");
  evaluate->add_option("--k", ev.ks, "comma-separated K values");
  evaluate->add_option("--json", ev.json, "write the JSON report here");

  PerturbArgs pa;
  auto* perturb = app.add_subcommand("perturb", "label-perturbation study");
  perturb->add_option("--gt", pa.gt, "ground-truth directory")->required();
  perturb->add_option("--vocab", pa.vocab, "vocabulary file")->required();
  perturb->add_option("--targets", pa.targets, "without,with,both");
  perturb->add_option("--ratios", pa.ratios, "comma-separated ratios in (0, 1]");
  perturb->add_option("--seed", pa.seed, "graph i is perturbed with seed ^ i");
  perturb->add_option("--json", pa.json, "write the JSON study here");

  PipelineArgs pl;
  auto* pipeline = app.add_subcommand("pipeline", "run the model on a proposal file");
  pipeline->add_option("--proposals", pl.proposals, "scene graph file with objects and no edges")->required();
  pipeline->add_option("--params", pl.params, "checkpoint")->required();
  pipeline->add_option("--config", pl.config, "pipeline config JSON")->required();
  pipeline->add_option("--out", pl.out, "output graph ('-' for stdout)")->required();
  pipeline->add_option("--seed", pl.seed, "edge sampling seed (random-pruning variant only)");

  TrainArgs tr;
  auto* train = app.add_subcommand("train-toy", "train on the synthetic world");
  train->add_option("--config", tr.config, "pipeline config JSON (defaults if omitted)");
  train->add_option("--out", tr.out, "checkpoint")->required();
  train->add_option("--seed", tr.seed, "overrides the config seed");
  train->add_option("--trajectory", tr.trajectory, "write the per-epoch JSON here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  try {
    if (*evaluate) return run_evaluate(ev);
    if (*perturb) return run_perturb(pa);
    if (*pipeline) return run_pipeline(pl);
    if (*train) return run_train(tr);
  } catch (const sgg::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const sgg::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
