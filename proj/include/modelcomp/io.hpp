#pragma once

#include <span>
#include <string>
#include <vector>

#include "modelcomp/classification.hpp"
#include "modelcomp/core.hpp"

namespace modelcomp {

/// Loads a COCO annotation-layout file (top-level images/annotations/
/// categories), building the category table from the file's own categories
/// block. Detections without an explicit model_id get `model_id`.
Dataset load_coco(const std::string& path, const std::string& model_id = "");

/// Loads either COCO layout against an existing unified table: annotation
/// layouts are remapped by category name, detection-results layouts (a
/// top-level array) must already carry unified category ids.
Dataset load_coco(const std::string& path, const CategoryTable& table,
                  const std::string& model_id = "");

/// Writes the annotation layout with sorted keys and full-precision numbers:
/// loading the result reproduces the input exactly, and identical inputs
/// produce byte-identical files.
void write_coco(const Dataset& data, const std::string& path);

/// Writes the detection-results layout (top-level array, unified ids).
void write_results(std::span<const Detection> dets, const std::string& path);

ModelRegistry load_registry(const std::string& path);
void write_registry(const ModelRegistry& registry, const std::string& path);

/// Classification labels file: {"categories": [...], "labels": [{"image_id",
/// "category", "score"?, "probs"?, "model_id"?}]}. Probability vectors are
/// ordered by unified category id.
std::vector<ClassLabel> load_class_labels(const std::string& path,
                                          const CategoryTable& table,
                                          const std::string& model_id = "");
std::vector<ClassLabel> load_class_labels(const std::string& path,
                                          CategoryTable* table_out,
                                          const std::string& model_id = "");
void write_class_labels(std::span<const ClassLabel> labels, const CategoryTable& table,
                        const std::string& path);

}  // namespace modelcomp
