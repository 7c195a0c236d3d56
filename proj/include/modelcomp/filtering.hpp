#pragma once

#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "modelcomp/core.hpp"

namespace modelcomp {

/// A class-probability distribution. Construction enforces the invariants
/// (each element in [0, 1], sum within 1e-6 of 1), so entropy never sees a
/// malformed vector.
class ProbVector {
public:
  explicit ProbVector(std::vector<double> probs);

  const std::vector<double>& probs() const { return probs_; }
  std::size_t size() const { return probs_.size(); }

private:
  std::vector<double> probs_;
};

struct FilterConfig {
  double entropy_threshold = std::numeric_limits<double>::infinity();   // tau
  double confidence_threshold = 0.001;                                  // theta

  void validate() const;
};

/// Shannon entropy in nats, -sum p ln p with 0 ln 0 = 0.
double entropy(const ProbVector& p);

/// Keeps the items whose entropy is <= tau (strict excess is discarded),
/// preserving input order.
template <class Item>
std::vector<std::pair<Item, ProbVector>> filter_by_entropy(
    const std::vector<std::pair<Item, ProbVector>>& labels, double tau) {
  if (tau < 0.0) {
    throw ValidationError("entropy threshold must be >= 0");
  }
  std::vector<std::pair<Item, ProbVector>> kept;
  kept.reserve(labels.size());
  for (const auto& item : labels) {
    if (entropy(item.second) <= tau) {
      kept.push_back(item);
    }
  }
  return kept;
}

/// Keeps detections with score >= theta, preserving input order.
std::vector<Detection> filter_by_confidence(std::span<const Detection> dets, double theta);

}  // namespace modelcomp
