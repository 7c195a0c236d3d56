#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "modelcomp/core.hpp"

namespace modelcomp {

/// Noise profile for a synthetic detector. All randomness flows from the
/// single seed; no hidden entropy sources.
struct NoiseModel {
  double jitter = 0.0;      // box perturbation std-dev as a fraction of box size
  double miss_rate = 0.0;   // probability of dropping a ground-truth object
  double fp_rate = 0.0;     // expected spurious boxes per image, in [0, 1]
  double score_mean = 0.8;  // true-detection confidence distribution
  double score_stddev = 0.1;
  double fp_score_min = 0.02;   // spurious boxes score low, uncorrelated
  double fp_score_max = 0.3;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Deterministic synthetic ground truth: n_images scenes of
/// objects_per_image boxes drawn over the given category names. Boxes are
/// non-degenerate and inside the image bounds.
Dataset generate_scenes(std::uint64_t seed, int n_images,
                        const std::vector<std::string>& category_names,
                        int objects_per_image);

struct SynthResult {
  std::vector<Detection> detections;
  std::vector<Detection> spurious;   // the false-positive subset of detections
};

/// A noisy black-box detector over the ground truth: jittered copies of the
/// supported-category boxes (minus misses) plus uniformly placed spurious
/// boxes. Deterministic per NoiseModel seed.
SynthResult synth_detector(const Dataset& ground_truth, const std::string& model_id,
                           const std::set<int>& categories, const NoiseModel& noise);

}  // namespace modelcomp
