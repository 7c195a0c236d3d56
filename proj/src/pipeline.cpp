#include "modelcomp/pipeline.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "modelcomp/client.hpp"
#include "modelcomp/io.hpp"

namespace modelcomp {

namespace {

namespace fs = std::filesystem;

void require_readable(const std::string& path, const char* what) {
  if (!fs::exists(path)) {
    throw IoError(std::string(what) + " '" + path + "' does not exist");
  }
}

void write_atomically(const Dataset& data, const std::string& path) {
  const std::string tmp = path + ".tmp";
  write_coco(data, tmp);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    throw IoError("cannot move '" + tmp + "' to '" + path + "': " + ec.message());
  }
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& config) {
  config.filter.validate();
  config.nms.validate();
  if (!(config.group_iou >= 0.0 && config.group_iou <= 1.0)) {
    throw ValidationError("grouping IoU threshold must be in [0, 1]");
  }

  // Validate every referenced path before any stage runs.
  require_readable(config.registry_path, "registry");
  require_readable(config.corpus_path, "corpus");
  if (config.truth_path) {
    require_readable(*config.truth_path, "ground truth");
  }
  if (config.out_path.empty()) {
    throw ValidationError("pipeline needs an output path");
  }

  const ModelRegistry registry = load_registry(config.registry_path);
  for (const auto& model : registry.models) {
    if (model.predictions_path) {
      require_readable(*model.predictions_path, "predictions file");
    } else if (!model.endpoint) {
      throw ValidationError("model '" + model.id +
                            "' has neither a predictions file nor an endpoint");
    }
  }

  const Dataset corpus = load_coco(config.corpus_path, registry.categories);

  PipelineResult result;
  std::vector<std::vector<Detection>> per_model;
  per_model.reserve(registry.models.size());
  for (const auto& model : registry.models) {
    std::vector<Detection> raw;
    if (model.predictions_path) {
      raw = load_coco(*model.predictions_path, registry.categories, model.id).detections;
    } else {
      CollectionJob job;
      job.model = model;
      job.corpus = corpus.images;
      job.parallelism = config.collect_parallelism;
      job.retry_budget = config.collect_retries;
      job.output_path = config.out_path + ".collected-" + model.id + ".json";
      job.bearer_token = config.bearer_token;
      collect_predictions(job, registry.categories);
      raw = load_coco(job.output_path, registry.categories, model.id).detections;
    }
    for (const auto& det : raw) {
      validate_detection(det, model);
    }
    result.counts.generated += raw.size();
    result.counts.generated_per_model[model.id] = raw.size();

    auto kept = filter_by_confidence(raw, config.filter.confidence_threshold);
    result.counts.filtered_out += raw.size() - kept.size();
    per_model.push_back(std::move(kept));
  }

  AggregationStats stats;
  result.labels = aggregate(per_model, registry, corpus.images, config.strategy,
                            config.group_iou, config.nms, &stats);
  result.counts.groups_formed = stats.groups_formed;
  result.counts.groups_kept = stats.groups_kept;
  result.counts.groups_deleted = stats.groups_deleted;
  result.counts.kept_detections = stats.kept_detections;
  result.counts.post_nms = stats.detections_out;

  write_atomically(result.labels, config.out_path);

  if (config.truth_path) {
    const Dataset truth = load_coco(*config.truth_path, registry.categories);
    result.report = mean_ap(result.labels.detections, truth.detections, registry.categories);
  }

  if (config.summary_path) {
    const std::string tmp = *config.summary_path + ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      if (!out) {
        throw IoError("cannot write summary '" + *config.summary_path + "'");
      }
      out << summary_to_json(config, result) << '\n';
    }
    std::error_code ec;
    fs::rename(tmp, *config.summary_path, ec);
    if (ec) {
      throw IoError("cannot move summary into place: " + ec.message());
    }
  }
  return result;
}

std::string summary_to_json(const PipelineConfig& config, const PipelineResult& result) {
  nlohmann::json counts{
      {"generated", result.counts.generated},
      {"filtered_out", result.counts.filtered_out},
      {"groups_formed", result.counts.groups_formed},
      {"groups_kept", result.counts.groups_kept},
      {"groups_deleted", result.counts.groups_deleted},
      {"kept_detections", result.counts.kept_detections},
      {"post_nms", result.counts.post_nms},
  };
  nlohmann::json per_model = nlohmann::json::object();
  for (const auto& [model, n] : result.counts.generated_per_model) {
    per_model[model] = n;
  }
  counts["generated_per_model"] = std::move(per_model);

  nlohmann::json root{
      {"strategy", to_string(config.strategy)},
      {"group_iou", config.group_iou},
      {"confidence_threshold", config.filter.confidence_threshold},
      {"nms",
       {{"method", to_string(config.nms.method)},
        {"sigma", config.nms.sigma},
        {"iou_cut", config.nms.iou_cut},
        {"score_prune", config.nms.score_prune}}},
      {"counts", std::move(counts)},
  };
  if (result.report) {
    nlohmann::json per_iou = nlohmann::json::array();
    for (const auto& [thr, ap] : result.report->per_iou_ap) {
      per_iou.push_back({{"iou", thr}, {"ap", ap}});
    }
    root["evaluation"] = {
        {"map_5095", result.report->map_5095},
        {"per_iou_ap", std::move(per_iou)},
        {"matched", result.report->matched},
        {"unmatched_preds", result.report->unmatched_preds},
        {"unmatched_truths", result.report->unmatched_truths},
    };
  }
  return root.dump(2);
}

}  // namespace modelcomp
