#pragma once

#include <optional>
#include <string>
#include <vector>

#include "modelcomp/core.hpp"

namespace modelcomp {

/// One prediction-collection run: post every corpus image to a model's
/// inference endpoint and write the responses as a COCO results file.
struct CollectionJob {
  ModelSpec model;                // endpoint required
  std::vector<ImageRef> corpus;
  int parallelism = 1;
  int retry_budget = 0;           // extra attempts per image after the first
  std::string output_path;
  std::string checkpoint_path;    // defaults to output_path + ".checkpoint"
  std::string manifest_path;      // defaults to output_path + ".failures.json"
  std::optional<std::string> bearer_token;

  void validate() const;
};

struct CollectionReport {
  std::size_t requested = 0;
  std::size_t collected = 0;   // images with a response this run
  std::size_t resumed = 0;     // images restored from the checkpoint
  std::size_t retries = 0;
  std::size_t failed = 0;
  std::vector<std::string> failed_images;
};

/// Collects predictions for every corpus image, bounded by `parallelism`
/// in-flight requests. Responses are validated against the model's declared
/// category set and written in corpus order regardless of completion order.
/// Per-image transport failures are retried up to the budget, then recorded
/// in the failure manifest as explicit gaps; completed images are
/// checkpointed so a rerun resumes instead of re-requesting.
CollectionReport collect_predictions(const CollectionJob& job, const CategoryTable& table);

}  // namespace modelcomp
