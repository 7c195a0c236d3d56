#include "modelcomp/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

namespace modelcomp {

MatchResult match_detections(std::span<const Detection> preds,
                             std::span<const Detection> truths,
                             double iou_threshold) {
  MatchResult result;
  result.pred_truth.assign(preds.size(), -1);
  result.truth_matched.assign(truths.size(), false);

  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return preds[a].score > preds[b].score;
  });

  for (std::size_t p : order) {
    const Detection& pred = preds[p];
    double best_iou = 0.0;
    int best_truth = -1;
    for (std::size_t t = 0; t < truths.size(); ++t) {
      if (result.truth_matched[t]) continue;
      if (truths[t].image != pred.image || truths[t].category != pred.category) continue;
      const double overlap = iou(pred.box, truths[t].box);
      if (overlap >= iou_threshold && overlap > best_iou) {
        best_iou = overlap;
        best_truth = static_cast<int>(t);
      }
    }
    if (best_truth >= 0) {
      result.pred_truth[p] = best_truth;
      result.truth_matched[best_truth] = true;
      ++result.matched;
    }
  }
  return result;
}

std::optional<double> average_precision(std::span<const Detection> preds,
                                        std::span<const Detection> truths,
                                        double iou_threshold) {
  if (truths.empty()) {
    return std::nullopt;   // AP undefined without ground truth
  }

  const MatchResult matching = match_detections(preds, truths, iou_threshold);

  // Walk predictions in the same score-descending order as the matcher.
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return preds[a].score > preds[b].score;
  });

  std::vector<double> precision;
  std::vector<double> recall;
  precision.reserve(order.size());
  recall.reserve(order.size());
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t p : order) {
    if (matching.pred_truth[p] >= 0) {
      ++tp;
    } else {
      ++fp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(truths.size()));
  }

  // Monotone envelope: interpolated precision at each point is the max
  // precision at any recall >= that point's recall.
  for (std::size_t i = precision.size(); i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }

  double ap = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double r = static_cast<double>(k) / 100.0;
    // First curve point with recall >= r; curve recall is non-decreasing.
    auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) {
      ap += precision[static_cast<std::size_t>(it - recall.begin())];
    }
  }
  return ap / 101.0;
}

EvalReport mean_ap(std::span<const Detection> preds,
                   std::span<const Detection> truths,
                   const CategoryTable& categories) {
  if (truths.empty()) {
    throw ValidationError("evaluation requires a nonempty ground-truth set");
  }

  std::map<int, std::vector<Detection>> preds_by_cat;
  std::map<int, std::vector<Detection>> truths_by_cat;
  for (const auto& d : preds) {
    if (!categories.contains(d.category)) {
      throw ValidationError("prediction references unknown category id " +
                            std::to_string(d.category));
    }
    preds_by_cat[d.category].push_back(d);
  }
  for (const auto& t : truths) {
    if (!categories.contains(t.category)) {
      throw ValidationError("ground truth references unknown category id " +
                            std::to_string(t.category));
    }
    truths_by_cat[t.category].push_back(t);
  }

  std::vector<double> thresholds;
  for (int i = 0; i < 10; ++i) {
    thresholds.push_back(0.5 + 0.05 * i);
  }

  EvalReport report;
  std::map<int, std::vector<double>> ap_by_cat;
  static const std::vector<Detection> kNone;
  for (double thr : thresholds) {
    double sum = 0.0;
    int defined = 0;
    for (const auto& [cat, cat_truths] : truths_by_cat) {
      auto pit = preds_by_cat.find(cat);
      const auto& cat_preds = pit == preds_by_cat.end() ? kNone : pit->second;
      auto ap = average_precision(cat_preds, cat_truths, thr);
      if (ap) {
        sum += *ap;
        ++defined;
        ap_by_cat[cat].push_back(*ap);
      }
    }
    report.per_iou_ap.emplace_back(thr, defined ? sum / defined : 0.0);
  }

  for (const auto& [cat, aps] : ap_by_cat) {
    const double mean = std::accumulate(aps.begin(), aps.end(), 0.0) / aps.size();
    report.per_category_ap.emplace_back(cat, mean);
  }

  double total = 0.0;
  for (const auto& [thr, ap] : report.per_iou_ap) {
    total += ap;
  }
  report.map_5095 = total / static_cast<double>(report.per_iou_ap.size());

  const MatchResult base = match_detections(preds, truths, 0.5);
  report.matched = base.matched;
  report.unmatched_preds = preds.size() - base.matched;
  report.unmatched_truths = truths.size() - base.matched;
  return report;
}

Top1Report top1_accuracy(
    const std::vector<std::pair<std::string, std::optional<int>>>& pseudo_labels,
    const std::vector<std::pair<std::string, int>>& truths) {
  std::unordered_map<std::string, int> truth_by_image;
  for (const auto& [image, category] : truths) {
    if (!truth_by_image.emplace(image, category).second) {
      throw ValidationError("duplicate ground-truth label for image '" + image + "'");
    }
  }

  Top1Report report;
  report.total = truth_by_image.size();
  std::unordered_map<std::string, bool> seen;
  for (const auto& [image, label] : pseudo_labels) {
    auto it = truth_by_image.find(image);
    if (it == truth_by_image.end()) {
      throw ValidationError("pseudo-label for image '" + image + "' has no ground truth");
    }
    if (!seen.emplace(image, true).second) {
      throw ValidationError("duplicate pseudo-label for image '" + image + "'");
    }
    if (!label) {
      continue;   // explicit abstention
    }
    ++report.voted;
    if (*label == it->second) {
      ++report.correct;
    }
  }
  report.abstained = report.total - report.voted;
  report.accuracy = report.voted ? static_cast<double>(report.correct) / report.voted : 0.0;
  report.coverage = report.total ? static_cast<double>(report.voted) / report.total : 0.0;
  return report;
}

}  // namespace modelcomp
