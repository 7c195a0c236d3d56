// Command-line front end: each pipeline stage is independently scriptable and
// every intermediate artifact is a plain COCO file.
//
// Exit codes: 0 success, 1 usage error, 2 data validation error,
// 3 endpoint or I/O failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>

#include <CLI11.hpp>
#include <json.hpp>

#include "modelcomp/aggregation.hpp"
#include "modelcomp/classification.hpp"
#include "modelcomp/client.hpp"
#include "modelcomp/evaluation.hpp"
#include "modelcomp/filtering.hpp"
#include "modelcomp/io.hpp"
#include "modelcomp/pipeline.hpp"
#include "modelcomp/simharness.hpp"

namespace {

using namespace modelcomp;

struct NmsFlags {
  std::string method = "gaussian";
  double sigma = 0.5;
  double iou_cut = 0.3;
  double prune = 0.001;

  SoftNmsConfig to_config() const {
    SoftNmsConfig cfg;
    cfg.method = nms_method_from_string(method);
    cfg.sigma = sigma;
    cfg.iou_cut = iou_cut;
    cfg.score_prune = prune;
    cfg.validate();
    return cfg;
  }
};

void add_nms_flags(CLI::App* cmd, NmsFlags& flags) {
  cmd->add_option("--nms", flags.method, "Soft-NMS decay method: gaussian|linear")
      ->check(CLI::IsMember({"gaussian", "linear"}));
  cmd->add_option("--nms-sigma", flags.sigma, "Gaussian decay scale (default 0.5)");
  cmd->add_option("--nms-cut", flags.iou_cut, "Linear method IoU cut (default 0.3)");
  cmd->add_option("--nms-prune", flags.prune, "Drop detections decayed below this score");
}

int run_collect(const std::string& registry_path, const std::string& corpus_path,
                const std::string& model_id, const std::string& out,
                int parallelism, int retries, const std::string& token) {
  const ModelRegistry registry = load_registry(registry_path);
  const ModelSpec* model = registry.find(model_id);
  if (!model) {
    throw ValidationError("model '" + model_id + "' is not in the registry");
  }
  CollectionJob job;
  job.model = *model;
  job.corpus = load_coco(corpus_path, registry.categories).images;
  job.parallelism = parallelism;
  job.retry_budget = retries;
  job.output_path = out;
  if (!token.empty()) {
    job.bearer_token = token;
  }
  const CollectionReport report = collect_predictions(job, registry.categories);
  std::cout << "collected " << report.collected << "/" << report.requested << " images ("
            << report.resumed << " resumed, " << report.retries << " retries)\n";
  if (report.failed > 0) {
    std::cout << report.failed << " images failed; see " << out << ".failures.json\n";
  }
  std::cout << "wrote " << out << "\n";
  return 0;
}

int run_filter(const std::string& registry_path, const std::string& in,
               const std::string& out, double confidence, double entropy_threshold,
               const std::string& task) {
  const ModelRegistry registry = load_registry(registry_path);
  if (task == "classification") {
    auto labels = load_class_labels(in, registry.categories);
    std::vector<ClassLabel> kept;
    for (const auto& label : labels) {
      // Labels without a distribution have nothing to threshold on.
      if (!label.probs || entropy(*label.probs) <= entropy_threshold) {
        kept.push_back(label);
      }
    }
    write_class_labels(kept, registry.categories, out);
    std::cout << "kept " << kept.size() << "/" << labels.size() << " labels\n";
    return 0;
  }
  const Dataset data = load_coco(in, registry.categories);
  auto kept = filter_by_confidence(data.detections, confidence);
  write_results(kept, out);
  std::cout << "kept " << kept.size() << "/" << data.detections.size() << " detections\n";
  return 0;
}

int run_aggregate(const std::string& registry_path, const std::string& corpus_path,
                  const std::string& out, const std::string& strategy_name,
                  double group_iou, const NmsFlags& nms, const std::string& task,
                  const std::string& tie) {
  const ModelRegistry registry = load_registry(registry_path);

  if (task == "classification") {
    std::vector<std::vector<ClassLabel>> per_model;
    for (const auto& model : registry.models) {
      if (!model.predictions_path) {
        throw ValidationError("model '" + model.id + "' has no predictions file");
      }
      per_model.push_back(
          load_class_labels(*model.predictions_path, registry.categories, model.id));
    }
    auto labels = aggregate_classification(per_model, tie_rule_from_string(tie));
    write_class_labels(labels, registry.categories, out);
    std::cout << "voted " << labels.size() << " pseudo-labels\n";
    return 0;
  }

  const Dataset corpus = load_coco(corpus_path, registry.categories);
  std::vector<std::vector<Detection>> per_model;
  for (const auto& model : registry.models) {
    if (!model.predictions_path) {
      throw ValidationError("model '" + model.id + "' has no predictions file");
    }
    per_model.push_back(
        load_coco(*model.predictions_path, registry.categories, model.id).detections);
  }
  AggregationStats stats;
  auto labels = aggregate(per_model, registry, corpus.images,
                          strategy_from_string(strategy_name), group_iou,
                          nms.to_config(), &stats);
  write_coco(labels, out);
  std::cout << "in=" << stats.detections_in << " groups=" << stats.groups_formed
            << " kept=" << stats.groups_kept << " deleted=" << stats.groups_deleted
            << " out=" << stats.detections_out << "\n";
  std::cout << "wrote " << out << "\n";
  return 0;
}

int run_evaluate(const std::string& preds_path, const std::string& truth_path,
                 const std::string& task, const std::string& json_out) {
  if (task == "classification") {
    CategoryTable table;
    auto truth_labels = load_class_labels(truth_path, &table);
    auto pred_labels = load_class_labels(preds_path, table);
    std::vector<std::pair<std::string, int>> truths;
    for (const auto& t : truth_labels) {
      truths.emplace_back(t.image, t.category);
    }
    std::vector<std::pair<std::string, std::optional<int>>> preds;
    for (const auto& p : pred_labels) {
      preds.emplace_back(p.image, p.category);
    }
    const Top1Report report = top1_accuracy(preds, truths);
    std::cout << "top-1 accuracy " << report.accuracy << " over " << report.voted
              << " voted images (coverage " << report.coverage << ", " << report.abstained
              << " abstained)\n";
    if (!json_out.empty()) {
      nlohmann::json j{{"accuracy", report.accuracy}, {"coverage", report.coverage},
                       {"total", report.total},       {"voted", report.voted},
                       {"correct", report.correct},   {"abstained", report.abstained}};
      std::ofstream out(json_out, std::ios::trunc);
      out << j.dump(2) << '\n';
    }
    return 0;
  }

  const Dataset truth = load_coco(truth_path);
  const Dataset preds = load_coco(preds_path, truth.categories);
  const EvalReport report = mean_ap(preds.detections, truth.detections, truth.categories);
  std::cout << "mAP@0.50:0.95 = " << report.map_5095 << "\n";
  for (const auto& [thr, ap] : report.per_iou_ap) {
    std::cout << "  AP@" << thr << " = " << ap << "\n";
  }
  std::cout << "matched " << report.matched << ", unmatched preds " << report.unmatched_preds
            << ", unmatched truths " << report.unmatched_truths << "\n";
  if (!json_out.empty()) {
    nlohmann::json per_iou = nlohmann::json::array();
    for (const auto& [thr, ap] : report.per_iou_ap) {
      per_iou.push_back({{"iou", thr}, {"ap", ap}});
    }
    nlohmann::json per_cat = nlohmann::json::array();
    for (const auto& [cat, ap] : report.per_category_ap) {
      per_cat.push_back({{"category_id", cat}, {"ap", ap}});
    }
    nlohmann::json j{{"map_5095", report.map_5095},
                     {"per_iou_ap", std::move(per_iou)},
                     {"per_category_ap", std::move(per_cat)},
                     {"matched", report.matched},
                     {"unmatched_preds", report.unmatched_preds},
                     {"unmatched_truths", report.unmatched_truths}};
    std::ofstream out(json_out, std::ios::trunc);
    out << j.dump(2) << '\n';
  }
  return 0;
}

int run_simulate(std::uint64_t seed, int images, int categories, int objects,
                 const std::string& detectors_path, const std::string& out_dir) {
  std::vector<std::string> names;
  for (int i = 1; i <= categories; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "cat%02d", i);
    names.push_back(buf);
  }
  const Dataset truth = generate_scenes(seed, images, names, objects);

  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::string truth_path = out_dir + "/ground_truth.json";
  write_coco(truth, truth_path);
  std::cout << "wrote " << truth_path << " (" << truth.detections.size() << " objects)\n";

  ModelRegistry registry;
  registry.categories = truth.categories;

  std::ifstream in(detectors_path);
  if (!in) {
    throw IoError("cannot open detector spec '" + detectors_path + "'");
  }
  nlohmann::json spec;
  try {
    spec = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("malformed detector spec: " + std::string(e.what()));
  }
  if (!spec.is_array() || spec.empty()) {
    throw ValidationError("detector spec must be a nonempty array");
  }

  for (const auto& rec : spec) {
    ModelSpec model;
    model.id = rec.at("id").get<std::string>();
    for (const auto& name : rec.at("categories")) {
      model.categories.insert(truth.categories.id_of(name.get<std::string>()));
    }
    NoiseModel noise;
    noise.jitter = rec.value("jitter", 0.0);
    noise.miss_rate = rec.value("miss_rate", 0.0);
    noise.fp_rate = rec.value("fp_rate", 0.0);
    noise.score_mean = rec.value("score_mean", 0.8);
    noise.score_stddev = rec.value("score_stddev", 0.1);
    noise.fp_score_min = rec.value("fp_score_min", 0.02);
    noise.fp_score_max = rec.value("fp_score_max", 0.3);
    noise.seed = rec.value("seed", seed + registry.models.size() + 1);

    const SynthResult result = synth_detector(truth, model.id, model.categories, noise);
    const std::string preds_path = out_dir + "/preds_" + model.id + ".json";
    write_results(result.detections, preds_path);
    std::cout << "wrote " << preds_path << " (" << result.detections.size() << " detections, "
              << result.spurious.size() << " spurious)\n";

    model.predictions_path = preds_path;
    registry.models.push_back(std::move(model));
  }

  const std::string registry_path = out_dir + "/registry.json";
  write_registry(registry, registry_path);
  std::cout << "wrote " << registry_path << "\n";
  return 0;
}

int run_pipeline_cmd(const PipelineConfig& config) {
  const PipelineResult result = run_pipeline(config);
  if (config.verbosity > 0) {
    const auto& c = result.counts;
    std::cout << "generated " << c.generated << " detections";
    for (const auto& [model, n] : c.generated_per_model) {
      std::cout << " [" << model << ": " << n << "]";
    }
    std::cout << "\nfiltered out " << c.filtered_out << " low-confidence detections\n"
              << "formed " << c.groups_formed << " object groups: kept " << c.groups_kept
              << ", deleted " << c.groups_deleted << "\n"
              << "pseudo-labels after Soft-NMS: " << c.post_nms << "\n"
              << "wrote " << config.out_path << "\n";
    if (result.report) {
      std::cout << "mAP@0.50:0.95 vs ground truth = " << result.report->map_5095 << "\n";
    }
    if (config.summary_path) {
      std::cout << "summary " << *config.summary_path << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo-label composition pipeline for black-box detection models"};
  app.require_subcommand(1);

  // collect
  auto* collect = app.add_subcommand("collect", "Collect predictions from a model endpoint");
  std::string registry_path, corpus_path, model_id, out_path, token;
  int parallelism = 4, retries = 2;
  collect->add_option("--registry", registry_path)->required();
  collect->add_option("--corpus", corpus_path)->required();
  collect->add_option("--model-id", model_id)->required();
  collect->add_option("--out", out_path)->required();
  collect->add_option("--parallelism", parallelism);
  collect->add_option("--retries", retries);
  collect->add_option("--token", token, "Bearer token for the Authorization header");

  // filter
  auto* filter = app.add_subcommand("filter", "Drop unreliable predictions");
  std::string filter_in, filter_out, filter_task = "detection";
  double confidence_threshold = 0.001;
  double entropy_threshold = std::numeric_limits<double>::infinity();
  filter->add_option("--registry", registry_path)->required();
  filter->add_option("--in", filter_in)->required();
  filter->add_option("--out", filter_out)->required();
  filter->add_option("--confidence-threshold", confidence_threshold,
                     "Keep detections with score >= threshold (default 0.001)");
  filter->add_option("--entropy-threshold", entropy_threshold,
                     "Keep classification labels with entropy <= threshold (default inf)");
  filter->add_option("--task", filter_task)->check(CLI::IsMember({"detection", "classification"}));

  // aggregate
  auto* agg = app.add_subcommand("aggregate", "Fuse per-model predictions into pseudo-labels");
  std::string strategy = "consensus", agg_task = "detection", tie = "abstain";
  double group_iou = 0.5;
  NmsFlags nms;
  agg->add_option("--registry", registry_path)->required();
  agg->add_option("--corpus", corpus_path);
  agg->add_option("--out", out_path)->required();
  agg->add_option("--strategy", strategy, "unanimous|consensus|affirmative")
      ->check(CLI::IsMember({"unanimous", "consensus", "affirmative"}));
  agg->add_option("--group-iou", group_iou, "IoU threshold for same-object grouping");
  add_nms_flags(agg, nms);
  agg->add_option("--task", agg_task)->check(CLI::IsMember({"detection", "classification"}));
  agg->add_option("--tie", tie, "Classification tie rule: abstain|mean-prob")
      ->check(CLI::IsMember({"abstain", "mean-prob"}));

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Score predictions against ground truth");
  std::string preds_path, truth_path, eval_task = "detection", json_out;
  eval->add_option("--preds", preds_path)->required();
  eval->add_option("--truth", truth_path)->required();
  eval->add_option("--task", eval_task)->check(CLI::IsMember({"detection", "classification"}));
  eval->add_option("--json", json_out, "Also write the report as JSON");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate synthetic ground truth and detectors");
  std::uint64_t seed = 1;
  int sim_images = 100, sim_categories = 10, sim_objects = 4;
  std::string detectors_path, out_dir = ".";
  sim->add_option("--seed", seed);
  sim->add_option("--images", sim_images);
  sim->add_option("--categories", sim_categories);
  sim->add_option("--objects-per-image", sim_objects);
  sim->add_option("--detectors", detectors_path, "JSON detector spec file")->required();
  sim->add_option("--out-dir", out_dir);

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "Run collect/filter/aggregate/evaluate end to end");
  PipelineConfig config;
  std::string truth_opt, summary_opt, pipe_strategy = "consensus", pipe_token;
  NmsFlags pipe_nms;
  pipe->add_option("--registry", config.registry_path)->required();
  pipe->add_option("--corpus", config.corpus_path)->required();
  pipe->add_option("--out", config.out_path)->required();
  pipe->add_option("--truth", truth_opt, "Ground-truth COCO file for evaluation");
  pipe->add_option("--summary", summary_opt, "Write the run summary JSON here");
  pipe->add_option("--strategy", pipe_strategy)
      ->check(CLI::IsMember({"unanimous", "consensus", "affirmative"}));
  pipe->add_option("--confidence-threshold", config.filter.confidence_threshold);
  pipe->add_option("--entropy-threshold", config.filter.entropy_threshold);
  pipe->add_option("--group-iou", config.group_iou);
  add_nms_flags(pipe, pipe_nms);
  pipe->add_option("--parallelism", config.collect_parallelism);
  pipe->add_option("--retries", config.collect_retries);
  pipe->add_option("--token", pipe_token);
  bool quiet = false;
  pipe->add_flag("--quiet", quiet, "Suppress the run summary on stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;   // usage error
  }

  try {
    if (collect->parsed()) {
      return run_collect(registry_path, corpus_path, model_id, out_path, parallelism,
                         retries, token);
    }
    if (filter->parsed()) {
      return run_filter(registry_path, filter_in, filter_out, confidence_threshold,
                        entropy_threshold, filter_task);
    }
    if (agg->parsed()) {
      if (agg_task == "detection" && corpus_path.empty()) {
        std::cerr << "aggregate: --corpus is required for detection\n";
        return 1;
      }
      return run_aggregate(registry_path, corpus_path, out_path, strategy, group_iou, nms,
                           agg_task, tie);
    }
    if (eval->parsed()) {
      return run_evaluate(preds_path, truth_path, eval_task, json_out);
    }
    if (sim->parsed()) {
      return run_simulate(seed, sim_images, sim_categories, sim_objects, detectors_path,
                          out_dir);
    }
    if (pipe->parsed()) {
      config.strategy = strategy_from_string(pipe_strategy);
      config.nms = pipe_nms.to_config();
      config.verbosity = quiet ? 0 : 1;
      if (!truth_opt.empty()) config.truth_path = truth_opt;
      if (!summary_opt.empty()) config.summary_path = summary_opt;
      if (!pipe_token.empty()) config.bearer_token = pipe_token;
      return run_pipeline_cmd(config);
    }
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
