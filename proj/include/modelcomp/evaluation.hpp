#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "modelcomp/core.hpp"

namespace modelcomp {

/// Greedy one-to-one matching outcome. pred_truth is aligned with the preds
/// argument (-1 = unmatched); truth_matched with the truths argument.
struct MatchResult {
  std::vector<int> pred_truth;
  std::vector<bool> truth_matched;
  std::size_t matched = 0;
};

/// COCO-style greedy matching: predictions are processed in descending score
/// order; each matches the highest-IoU still-unmatched truth of the same
/// image and category with IoU >= threshold.
MatchResult match_detections(std::span<const Detection> preds,
                             std::span<const Detection> truths,
                             double iou_threshold);

/// Average precision for one category at one IoU threshold, area under the
/// precision-recall curve with 101-point interpolation over recall
/// {0.00, 0.01, ..., 1.00}. Empty optional when the category has no ground
/// truth (excluded from means).
std::optional<double> average_precision(std::span<const Detection> preds,
                                        std::span<const Detection> truths,
                                        double iou_threshold);

struct EvalReport {
  double map_5095 = 0.0;
  std::vector<std::pair<double, double>> per_iou_ap;    // (threshold, AP over categories)
  std::vector<std::pair<int, double>> per_category_ap;  // (category id, AP over thresholds)
  std::size_t matched = 0;           // counts at IoU 0.50
  std::size_t unmatched_preds = 0;
  std::size_t unmatched_truths = 0;
};

/// mAP @IoU=0.50:0.95: AP averaged over categories with ground truth, then
/// over the ten thresholds 0.50, 0.55, ..., 0.95.
EvalReport mean_ap(std::span<const Detection> preds,
                   std::span<const Detection> truths,
                   const CategoryTable& categories);

struct Top1Report {
  double accuracy = 0.0;   // correct / voted
  double coverage = 0.0;   // voted / total
  std::size_t total = 0;
  std::size_t voted = 0;
  std::size_t correct = 0;
  std::size_t abstained = 0;
};

/// Top-1 accuracy over non-abstained images; abstentions (explicit nullopt or
/// absent pseudo-label) are reported separately via coverage.
Top1Report top1_accuracy(
    const std::vector<std::pair<std::string, std::optional<int>>>& pseudo_labels,
    const std::vector<std::pair<std::string, int>>& truths);

}  // namespace modelcomp
