#pragma once

#include <map>
#include <optional>
#include <string>

#include "modelcomp/aggregation.hpp"
#include "modelcomp/evaluation.hpp"
#include "modelcomp/filtering.hpp"

namespace modelcomp {

/// Configuration for the full data path: per-model load/collect, confidence
/// filtering, aggregation, serialization, optional evaluation.
struct PipelineConfig {
  std::string registry_path;
  std::string corpus_path;
  std::optional<std::string> truth_path;
  std::string out_path;
  std::optional<std::string> summary_path;

  AggregationStrategy strategy = AggregationStrategy::consensus;
  FilterConfig filter;
  double group_iou = 0.5;
  SoftNmsConfig nms;

  int collect_parallelism = 4;   // used when a model has an endpoint but no file
  int collect_retries = 2;
  std::optional<std::string> bearer_token;

  int verbosity = 1;
};

/// Per-stage counts of the run. Internally consistent: groups_kept +
/// groups_deleted = groups_formed, and post_nms <= kept_detections.
struct StageCounts {
  std::size_t generated = 0;      // detections loaded or collected
  std::size_t filtered_out = 0;   // removed by the confidence filter
  std::size_t groups_formed = 0;
  std::size_t groups_kept = 0;
  std::size_t groups_deleted = 0;
  std::size_t kept_detections = 0;
  std::size_t post_nms = 0;       // final pseudo-label count
  std::map<std::string, std::size_t> generated_per_model;
};

struct PipelineResult {
  PseudoLabelSet labels;
  std::optional<EvalReport> report;
  StageCounts counts;
};

/// Runs the pipeline end to end. All referenced paths are validated before
/// any work begins; the output is written to a temporary file and renamed on
/// success, so failures never clobber prior results.
PipelineResult run_pipeline(const PipelineConfig& config);

std::string summary_to_json(const PipelineConfig& config, const PipelineResult& result);

}  // namespace modelcomp
