#include "modelcomp/simharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <unordered_map>

namespace modelcomp {

namespace {

constexpr int kImageWidth = 640;
constexpr int kImageHeight = 480;
constexpr double kMinSide = 2.0;

BBox random_box(std::mt19937_64& rng, int image_w, int image_h) {
  std::uniform_real_distribution<double> side_w(24.0, 160.0);
  std::uniform_real_distribution<double> side_h(24.0, 160.0);
  const double w = side_w(rng);
  const double h = side_h(rng);
  std::uniform_real_distribution<double> pos_x(0.0, image_w - w);
  std::uniform_real_distribution<double> pos_y(0.0, image_h - h);
  return BBox(pos_x(rng), pos_y(rng), w, h);
}

}  // namespace

void NoiseModel::validate() const {
  if (!(jitter >= 0.0)) {
    throw ValidationError("jitter must be >= 0");
  }
  if (!(miss_rate >= 0.0 && miss_rate <= 1.0)) {
    throw ValidationError("miss rate must be in [0, 1]");
  }
  if (!(fp_rate >= 0.0 && fp_rate <= 1.0)) {
    throw ValidationError("false-positive rate must be in [0, 1]");
  }
  if (!(score_stddev >= 0.0)) {
    throw ValidationError("score stddev must be >= 0");
  }
  if (!(fp_score_min >= 0.0 && fp_score_max <= 1.0 && fp_score_min <= fp_score_max)) {
    throw ValidationError("false-positive score range must be within [0, 1]");
  }
}

Dataset generate_scenes(std::uint64_t seed, int n_images,
                        const std::vector<std::string>& category_names,
                        int objects_per_image) {
  if (n_images < 1) {
    throw ValidationError("scene generation needs n_images >= 1");
  }
  if (category_names.empty()) {
    throw ValidationError("scene generation needs at least one category");
  }
  if (objects_per_image < 0) {
    throw ValidationError("objects per image must be >= 0");
  }

  Dataset data;
  data.categories = CategoryTable::from_names(category_names);
  const auto entries = data.categories.entries();

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_cat(0, entries.size() - 1);

  for (int i = 1; i <= n_images; ++i) {
    ImageRef image;
    image.id = std::to_string(i);
    image.width = kImageWidth;
    image.height = kImageHeight;
    char name[32];
    std::snprintf(name, sizeof(name), "synthetic/%06d.jpg", i);
    image.uri = name;
    data.images.push_back(image);

    for (int k = 0; k < objects_per_image; ++k) {
      data.detections.push_back(Detection{
          image.id,
          random_box(rng, kImageWidth, kImageHeight),
          entries[pick_cat(rng)].id,
          1.0,
          "",
      });
    }
  }
  return data;
}

SynthResult synth_detector(const Dataset& ground_truth, const std::string& model_id,
                           const std::set<int>& categories, const NoiseModel& noise) {
  noise.validate();
  if (categories.empty()) {
    throw ValidationError("detector '" + model_id + "' supports no categories");
  }
  for (int cat : categories) {
    if (!ground_truth.categories.contains(cat)) {
      throw ValidationError("detector '" + model_id + "' category id " +
                            std::to_string(cat) + " not in the ground-truth table");
    }
  }

  std::unordered_map<std::string, const ImageRef*> images;
  for (const auto& img : ground_truth.images) {
    images.emplace(img.id, &img);
  }
  const std::vector<int> supported(categories.begin(), categories.end());

  std::mt19937_64 rng(noise.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SynthResult result;

  auto emit_true = [&](const Detection& gt, const ImageRef& image) {
    double x = gt.box.x;
    double y = gt.box.y;
    double w = gt.box.w;
    double h = gt.box.h;
    if (noise.jitter > 0.0) {
      x += gauss(rng) * noise.jitter * w;
      y += gauss(rng) * noise.jitter * h;
      w *= 1.0 + gauss(rng) * noise.jitter;
      h *= 1.0 + gauss(rng) * noise.jitter;
    }
    w = std::clamp(w, kMinSide, static_cast<double>(image.width));
    h = std::clamp(h, kMinSide, static_cast<double>(image.height));
    x = std::clamp(x, 0.0, image.width - w);
    y = std::clamp(y, 0.0, image.height - h);

    double score = noise.score_mean;
    if (noise.score_stddev > 0.0) {
      score += gauss(rng) * noise.score_stddev;
    }
    score = std::clamp(score, 0.01, 1.0);

    result.detections.push_back(Detection{gt.image, BBox(x, y, w, h), gt.category, score, model_id});
  };

  // Walk ground truth in image order so every draw is reproducible.
  for (const auto& image : ground_truth.images) {
    for (const auto& gt : ground_truth.detections) {
      if (gt.image != image.id || !categories.count(gt.category)) {
        continue;
      }
      if (noise.miss_rate > 0.0 && unit(rng) < noise.miss_rate) {
        continue;
      }
      emit_true(gt, image);
    }

    if (noise.fp_rate > 0.0 && unit(rng) < noise.fp_rate) {
      std::uniform_int_distribution<std::size_t> pick_cat(0, supported.size() - 1);
      std::uniform_real_distribution<double> fp_score(noise.fp_score_min, noise.fp_score_max);
      Detection spurious{
          image.id,
          random_box(rng, image.width, image.height),
          supported[pick_cat(rng)],
          fp_score(rng),
          model_id,
      };
      result.detections.push_back(spurious);
      result.spurious.push_back(spurious);
    }
  }
  return result;
}

}  // namespace modelcomp
