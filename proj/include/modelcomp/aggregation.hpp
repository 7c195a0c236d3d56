#pragma once

#include <span>
#include <string>
#include <vector>

#include "modelcomp/core.hpp"

namespace modelcomp {

enum class AggregationStrategy {
  unanimous,    // keep only when every eligible model contributed
  consensus,    // keep when at least half of the eligible models contributed
  affirmative,  // keep everything (union of all predictions)
};

AggregationStrategy strategy_from_string(const std::string& name);
std::string to_string(AggregationStrategy s);

/// Detections from one or more models clustered as one physical object: a
/// connected component of the same-category / IoU-overlap graph on one image.
struct ObjectGroup {
  std::string image;
  int category = 0;
  std::vector<Detection> members;   // input order preserved
  int unique_models = 0;            // K: distinct model ids among members
  int eligible_models = 0;          // N_eligible: registry models supporting the category
};

struct SoftNmsConfig {
  enum class Method { gaussian, linear };

  Method method = Method::gaussian;
  double sigma = 0.5;        // gaussian decay scale
  double iou_cut = 0.3;      // linear method decays only above this overlap
  double score_prune = 0.001;

  void validate() const;
};

SoftNmsConfig::Method nms_method_from_string(const std::string& name);
std::string to_string(SoftNmsConfig::Method m);

/// The aggregated, filtered dataset ready for downstream training.
using PseudoLabelSet = Dataset;

struct AggregationStats {
  std::size_t detections_in = 0;
  std::size_t groups_formed = 0;
  std::size_t groups_kept = 0;
  std::size_t groups_deleted = 0;
  std::size_t kept_detections = 0;   // members of kept groups, pre-NMS
  std::size_t detections_out = 0;
};

/// Regroups per-model prediction lists into per-image buckets aligned with
/// the corpus order. Every detection must reference a corpus image.
std::vector<std::vector<Detection>> group_by_image(
    const std::vector<std::vector<Detection>>& per_model,
    std::span<const ImageRef> corpus);

/// Clusters one image's detections into object groups: connected components
/// of the graph whose edges join same-category pairs with IoU >= threshold.
/// Groups are ordered by their first member's position in the input;
/// eligible_models is left 0 (annotated by aggregate against the registry).
std::vector<ObjectGroup> group_by_object(std::span<const Detection> image_dets,
                                         double iou_threshold);

/// Number of registry models whose category set contains the category.
/// A category supported by no model cannot have originated from any
/// registered model, so that case is a hard error.
int eligible_model_count(int category, const ModelRegistry& registry);

/// The keep rule: unanimous keeps iff K = N_eligible, consensus keeps iff
/// K >= N_eligible / 2 (kept on the exact boundary), affirmative always keeps.
bool apply_strategy(const ObjectGroup& group, AggregationStrategy strategy);

/// Soft non-maximum suppression within one group. Iteratively selects the
/// highest-score remaining detection (ties: score desc, model id asc, input
/// index asc) and decays the rest by exp(-iou^2/sigma) (gaussian) or by
/// (1 - iou) when iou > iou_cut (linear); detections whose score falls below
/// score_prune are dropped. Survivors come back in descending final-score
/// order with their decayed scores.
std::vector<Detection> soft_nms(const ObjectGroup& group, const SoftNmsConfig& cfg);

/// The whole per-image pipeline: group_by_image -> group_by_object ->
/// apply_strategy -> soft_nms -> union, in corpus order. Deterministic for
/// fixed inputs.
PseudoLabelSet aggregate(const std::vector<std::vector<Detection>>& per_model,
                         const ModelRegistry& registry,
                         std::span<const ImageRef> corpus,
                         AggregationStrategy strategy,
                         double iou_threshold,
                         const SoftNmsConfig& nms,
                         AggregationStats* stats = nullptr);

}  // namespace modelcomp
