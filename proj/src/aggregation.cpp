#include "modelcomp/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

namespace modelcomp {

AggregationStrategy strategy_from_string(const std::string& name) {
  if (name == "unanimous") return AggregationStrategy::unanimous;
  if (name == "consensus") return AggregationStrategy::consensus;
  if (name == "affirmative") return AggregationStrategy::affirmative;
  throw ValidationError("unknown aggregation strategy '" + name + "'");
}

std::string to_string(AggregationStrategy s) {
  switch (s) {
    case AggregationStrategy::unanimous: return "unanimous";
    case AggregationStrategy::consensus: return "consensus";
    case AggregationStrategy::affirmative: return "affirmative";
  }
  throw ValidationError("invalid aggregation strategy value");
}

void SoftNmsConfig::validate() const {
  if (!(sigma > 0.0)) {
    throw ValidationError("nms sigma must be > 0");
  }
  if (!(iou_cut >= 0.0 && iou_cut <= 1.0)) {
    throw ValidationError("nms iou cut must be in [0, 1]");
  }
  if (!(score_prune >= 0.0 && score_prune <= 1.0)) {
    throw ValidationError("nms score prune must be in [0, 1]");
  }
}

SoftNmsConfig::Method nms_method_from_string(const std::string& name) {
  if (name == "gaussian") return SoftNmsConfig::Method::gaussian;
  if (name == "linear") return SoftNmsConfig::Method::linear;
  throw ValidationError("unknown nms method '" + name + "'");
}

std::string to_string(SoftNmsConfig::Method m) {
  return m == SoftNmsConfig::Method::gaussian ? "gaussian" : "linear";
}

std::vector<std::vector<Detection>> group_by_image(
    const std::vector<std::vector<Detection>>& per_model,
    std::span<const ImageRef> corpus) {
  std::unordered_map<std::string, std::size_t> index;
  index.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    index.emplace(corpus[i].id, i);
  }

  std::vector<std::vector<Detection>> buckets(corpus.size());
  for (std::size_t m = 0; m < per_model.size(); ++m) {
    for (std::size_t d = 0; d < per_model[m].size(); ++d) {
      const Detection& det = per_model[m][d];
      auto it = index.find(det.image);
      if (it == index.end()) {
        throw ValidationError("detection #" + std::to_string(d) + " of model '" +
                              det.model + "' references image '" + det.image +
                              "' absent from the corpus");
      }
      buckets[it->second].push_back(det);
    }
  }
  return buckets;
}

namespace {

// Union-find over detection indices within one image.
struct DisjointSet {
  std::vector<std::size_t> parent;

  explicit DisjointSet(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), std::size_t{0});
  }

  std::size_t find(std::size_t a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) {
      parent[std::max(a, b)] = std::min(a, b);
    }
  }
};

double decay_factor(const SoftNmsConfig& cfg, double overlap) {
  if (cfg.method == SoftNmsConfig::Method::gaussian) {
    return std::exp(-(overlap * overlap) / cfg.sigma);
  }
  return overlap > cfg.iou_cut ? 1.0 - overlap : 1.0;
}

}  // namespace

std::vector<ObjectGroup> group_by_object(std::span<const Detection> image_dets,
                                         double iou_threshold) {
  const std::size_t n = image_dets.size();
  DisjointSet ds(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (image_dets[i].category == image_dets[j].category &&
          iou(image_dets[i].box, image_dets[j].box) >= iou_threshold) {
        ds.unite(i, j);
      }
    }
  }

  // Emit groups ordered by their first member's input position.
  std::map<std::size_t, ObjectGroup> by_root;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t root = ds.find(i);
    auto [it, fresh] = by_root.try_emplace(root);
    ObjectGroup& g = it->second;
    if (fresh) {
      g.image = image_dets[i].image;
      g.category = image_dets[i].category;
    }
    g.members.push_back(image_dets[i]);
  }

  std::vector<ObjectGroup> groups;
  groups.reserve(by_root.size());
  for (auto& [root, g] : by_root) {
    std::set<std::string> models;
    for (const auto& d : g.members) {
      models.insert(d.model);
    }
    g.unique_models = static_cast<int>(models.size());
    groups.push_back(std::move(g));
  }
  return groups;
}

int eligible_model_count(int category, const ModelRegistry& registry) {
  int count = 0;
  for (const auto& m : registry.models) {
    if (m.categories.count(category)) {
      ++count;
    }
  }
  if (count == 0) {
    throw ValidationError("category id " + std::to_string(category) +
                          " is in no registered model's category set");
  }
  return count;
}

bool apply_strategy(const ObjectGroup& group, AggregationStrategy strategy) {
  switch (strategy) {
    case AggregationStrategy::unanimous:
      return group.unique_models >= group.eligible_models;
    case AggregationStrategy::consensus:
      return static_cast<double>(group.unique_models) >=
             static_cast<double>(group.eligible_models) / 2.0;
    case AggregationStrategy::affirmative:
      return true;
  }
  throw ValidationError("invalid aggregation strategy value");
}

std::vector<Detection> soft_nms(const ObjectGroup& group, const SoftNmsConfig& cfg) {
  cfg.validate();

  struct Entry {
    Detection det;
    std::size_t index;   // input position, for deterministic tie-breaking
  };
  std::vector<Entry> remaining;
  remaining.reserve(group.members.size());
  for (std::size_t i = 0; i < group.members.size(); ++i) {
    remaining.push_back({group.members[i], i});
  }

  auto better = [](const Entry& a, const Entry& b) {
    if (a.det.score != b.det.score) return a.det.score > b.det.score;
    if (a.det.model != b.det.model) return a.det.model < b.det.model;
    return a.index < b.index;
  };

  std::vector<Detection> survivors;
  survivors.reserve(remaining.size());
  while (!remaining.empty()) {
    auto top = std::min_element(remaining.begin(), remaining.end(),
                                [&](const Entry& a, const Entry& b) { return better(a, b); });
    Entry selected = *top;
    remaining.erase(top);
    survivors.push_back(selected.det);

    std::vector<Entry> next;
    next.reserve(remaining.size());
    for (auto& e : remaining) {
      e.det.score *= decay_factor(cfg, iou(selected.det.box, e.det.box));
      if (e.det.score >= cfg.score_prune) {
        next.push_back(std::move(e));
      }
    }
    remaining = std::move(next);
  }
  return survivors;
}

PseudoLabelSet aggregate(const std::vector<std::vector<Detection>>& per_model,
                         const ModelRegistry& registry,
                         std::span<const ImageRef> corpus,
                         AggregationStrategy strategy,
                         double iou_threshold,
                         const SoftNmsConfig& nms,
                         AggregationStats* stats) {
  AggregationStats local;
  auto buckets = group_by_image(per_model, corpus);

  PseudoLabelSet out;
  out.images.assign(corpus.begin(), corpus.end());
  out.categories = registry.categories;

  for (const auto& bucket : buckets) {
    local.detections_in += bucket.size();
    auto groups = group_by_object(bucket, iou_threshold);
    local.groups_formed += groups.size();
    for (auto& group : groups) {
      group.eligible_models = eligible_model_count(group.category, registry);
      if (!apply_strategy(group, strategy)) {
        ++local.groups_deleted;
        continue;
      }
      ++local.groups_kept;
      local.kept_detections += group.members.size();
      auto survivors = soft_nms(group, nms);
      local.detections_out += survivors.size();
      out.detections.insert(out.detections.end(), survivors.begin(), survivors.end());
    }
  }

  if (stats) {
    *stats = local;
  }
  return out;
}

}  // namespace modelcomp
