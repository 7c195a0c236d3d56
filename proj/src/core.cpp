#include "modelcomp/core.hpp"

#include <algorithm>
#include <cmath>

namespace modelcomp {

BBox::BBox(double x, double y, double w, double h) : x(x), y(y), w(w), h(h) {
  if (!(std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h))) {
    throw ValidationError("bbox has non-finite coordinates");
  }
  if (!(w > 0.0 && h > 0.0)) {
    throw ValidationError("bbox has non-positive width or height");
  }
}

bool operator==(const BBox& a, const BBox& b) {
  return a.x == b.x && a.y == b.y && a.w == b.w && a.h == b.h;
}

double area(const BBox& b) {
  return b.w * b.h;
}

double iou(const BBox& a, const BBox& b) {
  if (a == b) {
    return 1.0;   // exact, untouched by the edge-rounding below
  }
  const double ix = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  const double iy = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  if (ix <= 0.0 || iy <= 0.0) {
    return 0.0;
  }
  const double inter = ix * iy;
  return inter / (area(a) + area(b) - inter);
}

CategoryTable CategoryTable::from_names(const std::vector<std::string>& names) {
  std::vector<std::string> sorted = names;
  std::sort(sorted.begin(), sorted.end());
  CategoryTable table;
  int next_id = 1;
  for (const auto& name : sorted) {
    table.add(next_id++, name);
  }
  return table;
}

void CategoryTable::add(int id, const std::string& name) {
  if (id < 1) {
    throw ValidationError("category id must be >= 1, got " + std::to_string(id));
  }
  if (name.empty()) {
    throw ValidationError("category name must be nonempty");
  }
  if (by_id_.count(id)) {
    throw ValidationError("duplicate category id " + std::to_string(id));
  }
  if (by_name_.count(name)) {
    throw ValidationError("duplicate category name '" + name + "'");
  }
  by_id_.emplace(id, name);
  by_name_.emplace(name, id);
}

int CategoryTable::id_of(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) {
    throw ValidationError("unknown category name '" + name + "'");
  }
  return it->second;
}

const std::string& CategoryTable::name_of(int id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) {
    throw ValidationError("unknown category id " + std::to_string(id));
  }
  return it->second;
}

std::optional<int> CategoryTable::find(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) {
    return std::nullopt;
  }
  return it->second;
}

bool CategoryTable::contains(int id) const {
  return by_id_.count(id) != 0;
}

std::vector<Category> CategoryTable::entries() const {
  std::vector<Category> out;
  out.reserve(by_id_.size());
  for (const auto& [id, name] : by_id_) {
    out.push_back({id, name});
  }
  return out;
}

bool operator==(const CategoryTable& a, const CategoryTable& b) {
  auto ea = a.entries();
  auto eb = b.entries();
  if (ea.size() != eb.size()) {
    return false;
  }
  for (std::size_t i = 0; i < ea.size(); ++i) {
    if (ea[i].id != eb[i].id || ea[i].name != eb[i].name) {
      return false;
    }
  }
  return true;
}

bool operator==(const Detection& a, const Detection& b) {
  return a.image == b.image && a.box == b.box && a.category == b.category &&
         a.score == b.score && a.model == b.model;
}

const ModelSpec* ModelRegistry::find(const std::string& model_id) const {
  for (const auto& m : models) {
    if (m.id == model_id) {
      return &m;
    }
  }
  return nullptr;
}

bool operator==(const ImageRef& a, const ImageRef& b) {
  return a.id == b.id && a.width == b.width && a.height == b.height && a.uri == b.uri;
}

void validate_score(double score) {
  if (!(score >= 0.0 && score <= 1.0)) {
    throw ValidationError("score must be in [0, 1], got " + std::to_string(score));
  }
}

void validate_image_ref(const ImageRef& image) {
  if (image.id.empty()) {
    throw ValidationError("image id must be nonempty");
  }
  if (image.width <= 0 || image.height <= 0) {
    throw ValidationError("image '" + image.id + "' has non-positive dimensions");
  }
}

void validate_detection(const Detection& det, const ModelSpec& model) {
  validate_score(det.score);
  if (!model.categories.count(det.category)) {
    throw ValidationError("model '" + model.id + "' emitted category id " +
                          std::to_string(det.category) +
                          " outside its declared set (image '" + det.image + "')");
  }
}

}  // namespace modelcomp
