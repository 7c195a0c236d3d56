#include "modelcomp/filtering.hpp"

#include <cmath>

namespace modelcomp {

ProbVector::ProbVector(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) {
    throw ValidationError("probability vector must be nonempty");
  }
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ValidationError("probability outside [0, 1]");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw ValidationError("probabilities sum to " + std::to_string(sum) + ", expected 1");
  }
}

void FilterConfig::validate() const {
  if (!(entropy_threshold >= 0.0)) {
    throw ValidationError("entropy threshold must be >= 0");
  }
  if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) {
    throw ValidationError("confidence threshold must be in [0, 1]");
  }
}

double entropy(const ProbVector& p) {
  double h = 0.0;
  for (double v : p.probs()) {
    if (v > 0.0) {
      h -= v * std::log(v);   // 0 ln 0 taken as 0
    }
  }
  return h;
}

std::vector<Detection> filter_by_confidence(std::span<const Detection> dets, double theta) {
  if (!(theta >= 0.0 && theta <= 1.0)) {
    throw ValidationError("confidence threshold must be in [0, 1]");
  }
  std::vector<Detection> kept;
  kept.reserve(dets.size());
  for (const auto& d : dets) {
    if (d.score >= theta) {
      kept.push_back(d);
    }
  }
  return kept;
}

}  // namespace modelcomp
