#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace modelcomp {

// Error classes aligned with the CLI exit codes: usage errors are handled by
// the argument parser (exit 1), ValidationError maps to exit 2, IoError and
// EndpointError to exit 3.
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class EndpointError : public IoError {
public:
  using IoError::IoError;
};

/// Axis-aligned box in pixel units, COCO convention: top-left corner plus
/// size. Construction rejects degenerate or non-finite boxes, so a BBox in
/// hand is always valid.
struct BBox {
  double x;
  double y;
  double w;
  double h;

  BBox(double x, double y, double w, double h);
};

bool operator==(const BBox& a, const BBox& b);

double area(const BBox& b);

/// Intersection over union. 0 for disjoint boxes, symmetric, in [0, 1].
double iou(const BBox& a, const BBox& b);

struct Category {
  int id = 0;
  std::string name;
};

/// Bijective id <-> name mapping for one run. Ids are >= 1 and unique, names
/// are unique. All categories flowing through a pipeline resolve against a
/// single table built as the union of the input models' category sets.
class CategoryTable {
public:
  CategoryTable() = default;

  /// Builds a table from names: duplicates rejected, ids assigned 1..K in
  /// lexicographic name order so the assignment is input-order independent.
  static CategoryTable from_names(const std::vector<std::string>& names);

  void add(int id, const std::string& name);

  int id_of(const std::string& name) const;        // throws ValidationError
  const std::string& name_of(int id) const;        // throws ValidationError
  std::optional<int> find(const std::string& name) const;
  bool contains(int id) const;

  std::vector<Category> entries() const;           // sorted by id
  std::size_t size() const { return by_id_.size(); }
  bool empty() const { return by_id_.empty(); }

private:
  std::map<int, std::string> by_id_;
  std::map<std::string, int> by_name_;
};

bool operator==(const CategoryTable& a, const CategoryTable& b);

/// One model's claim about one object on one image.
struct Detection {
  std::string image;
  BBox box;
  int category = 0;     // unified-table id
  double score = 1.0;   // [0, 1]
  std::string model;    // emitting model id, empty for ground truth
};

bool operator==(const Detection& a, const Detection& b);

/// A registered black-box input model: identity, the category ids it can
/// emit, and how its predictions are obtained (a live endpoint, a
/// predictions file, or both).
struct ModelSpec {
  std::string id;
  std::set<int> categories;
  std::optional<std::string> endpoint;
  std::optional<std::string> predictions_path;
};

struct ModelRegistry {
  std::vector<ModelSpec> models;
  CategoryTable categories;   // union of all models' sets

  const ModelSpec* find(const std::string& model_id) const;
};

struct ImageRef {
  std::string id;
  int width = 0;
  int height = 0;
  std::optional<std::string> uri;
};

bool operator==(const ImageRef& a, const ImageRef& b);

/// A dataset bundle: the corpus, its detections (annotations or
/// predictions), and the category table they resolve against.
struct Dataset {
  std::vector<ImageRef> images;
  std::vector<Detection> detections;
  CategoryTable categories;
};

// Boundary validation. Detections enter the pipeline only through io, the
// client, or the harness; each calls these before handing data onward.
void validate_score(double score);
void validate_image_ref(const ImageRef& image);
void validate_detection(const Detection& det, const ModelSpec& model);

}  // namespace modelcomp
