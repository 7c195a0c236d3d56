#include "modelcomp/io.hpp"

#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

namespace modelcomp {

namespace {

using nlohmann::json;

json parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open '" + path + "' for reading");
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("malformed JSON in '" + path + "': " + e.what());
  }
}

void dump_file(const json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open '" + path + "' for writing");
  }
  out << j.dump(2) << '\n';
  if (!out) {
    throw IoError("failed writing '" + path + "'");
  }
}

std::string where(const std::string& path, const char* section, std::size_t index) {
  return path + ": " + section + "[" + std::to_string(index) + "]";
}

// COCO ids may be numbers or strings; both normalize to a string key.
std::string id_to_string(const json& v, const std::string& context) {
  if (v.is_string()) {
    return v.get<std::string>();
  }
  if (v.is_number_integer() || v.is_number_unsigned()) {
    return std::to_string(v.get<long long>());
  }
  throw ValidationError(context + ": id must be an integer or a string");
}

// Ids that round-trip through an integer are written back as integers so the
// output stays consumable by ordinary COCO tooling.
bool is_canonical_int(const std::string& s) {
  if (s.empty() || s.size() > 18) return false;
  if (s.size() > 1 && s[0] == '0') return false;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
  }
  return true;
}

json id_to_json(const std::string& id) {
  if (is_canonical_int(id)) {
    return json(std::stoll(id));
  }
  return json(id);
}

BBox parse_bbox(const json& record, const std::string& context) {
  if (!record.contains("bbox")) {
    throw ValidationError(context + ": missing bbox");
  }
  const json& b = record.at("bbox");
  if (!b.is_array() || b.size() != 4 || !b[0].is_number() || !b[1].is_number() ||
      !b[2].is_number() || !b[3].is_number()) {
    throw ValidationError(context + ": bbox must be [x, y, width, height]");
  }
  try {
    return BBox(b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>());
  } catch (const ValidationError& e) {
    throw ValidationError(context + ": " + e.what());
  }
}

double parse_score(const json& record, const std::string& context) {
  if (!record.contains("score")) {
    return 1.0;   // ground-truth annotations carry no score
  }
  if (!record.at("score").is_number()) {
    throw ValidationError(context + ": score must be a number");
  }
  const double score = record.at("score").get<double>();
  try {
    validate_score(score);
  } catch (const ValidationError& e) {
    throw ValidationError(context + ": " + e.what());
  }
  return score;
}

std::vector<ImageRef> parse_images(const json& root, const std::string& path) {
  std::vector<ImageRef> images;
  if (!root.contains("images")) {
    return images;
  }
  const json& arr = root.at("images");
  if (!arr.is_array()) {
    throw ValidationError(path + ": images must be an array");
  }
  std::set<std::string> seen;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string context = where(path, "images", i);
    const json& rec = arr[i];
    if (!rec.contains("id")) {
      throw ValidationError(context + ": missing id");
    }
    ImageRef image;
    image.id = id_to_string(rec.at("id"), context);
    image.width = rec.value("width", 0);
    image.height = rec.value("height", 0);
    if (rec.contains("file_name")) {
      image.uri = rec.at("file_name").get<std::string>();
    }
    try {
      validate_image_ref(image);
    } catch (const ValidationError& e) {
      throw ValidationError(context + ": " + e.what());
    }
    if (!seen.insert(image.id).second) {
      throw ValidationError(context + ": duplicate image id '" + image.id + "'");
    }
    images.push_back(std::move(image));
  }
  return images;
}

// File-local category id -> unified id, remapped by name.
std::map<long long, int> remap_categories(const json& root, const CategoryTable& table,
                                          const std::string& path) {
  std::map<long long, int> remap;
  if (!root.contains("categories")) {
    throw ValidationError(path + ": missing categories block");
  }
  const json& arr = root.at("categories");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string context = where(path, "categories", i);
    const json& rec = arr[i];
    if (!rec.contains("id") || !rec.contains("name")) {
      throw ValidationError(context + ": categories need id and name");
    }
    const std::string name = rec.at("name").get<std::string>();
    auto unified = table.find(name);
    if (!unified) {
      throw ValidationError(context + ": category '" + name + "' absent from the registry");
    }
    remap[rec.at("id").get<long long>()] = *unified;
  }
  return remap;
}

Dataset load_annotation_layout(const json& root, const CategoryTable& table,
                               const std::string& path, const std::string& model_id) {
  Dataset data;
  data.categories = table;
  data.images = parse_images(root, path);
  const auto remap = remap_categories(root, table, path);

  std::set<std::string> image_ids;
  for (const auto& img : data.images) {
    image_ids.insert(img.id);
  }

  if (root.contains("annotations")) {
    const json& arr = root.at("annotations");
    if (!arr.is_array()) {
      throw ValidationError(path + ": annotations must be an array");
    }
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string context = where(path, "annotations", i);
      const json& rec = arr[i];
      if (!rec.contains("image_id") || !rec.contains("category_id")) {
        throw ValidationError(context + ": missing image_id or category_id");
      }
      const std::string image = id_to_string(rec.at("image_id"), context);
      if (!image_ids.empty() && !image_ids.count(image)) {
        throw ValidationError(context + ": image_id '" + image +
                              "' not present in the file's images");
      }
      auto cat = remap.find(rec.at("category_id").get<long long>());
      if (cat == remap.end()) {
        throw ValidationError(context + ": category_id not in the file's categories");
      }
      data.detections.push_back(Detection{
          image,
          parse_bbox(rec, context),
          cat->second,
          parse_score(rec, context),
          rec.contains("model_id") ? rec.at("model_id").get<std::string>() : model_id,
      });
    }
  }
  return data;
}

Dataset load_results_layout(const json& root, const CategoryTable& table,
                            const std::string& path, const std::string& model_id) {
  Dataset data;
  data.categories = table;
  for (std::size_t i = 0; i < root.size(); ++i) {
    const std::string context = where(path, "results", i);
    const json& rec = root[i];
    if (!rec.contains("image_id") || !rec.contains("category_id")) {
      throw ValidationError(context + ": missing image_id or category_id");
    }
    const int category = rec.at("category_id").get<int>();
    if (!table.contains(category)) {
      throw ValidationError(context + ": category id " + std::to_string(category) +
                            " absent from the registry");
    }
    data.detections.push_back(Detection{
        id_to_string(rec.at("image_id"), context),
        parse_bbox(rec, context),
        category,
        parse_score(rec, context),
        rec.contains("model_id") ? rec.at("model_id").get<std::string>() : model_id,
    });
  }
  return data;
}

}  // namespace

Dataset load_coco(const std::string& path, const std::string& model_id) {
  const json root = parse_file(path);
  if (!root.is_object() || !root.contains("categories")) {
    throw ValidationError(path + ": expected an annotation-layout file with a categories block");
  }
  CategoryTable table;
  for (const auto& rec : root.at("categories")) {
    table.add(rec.at("id").get<int>(), rec.at("name").get<std::string>());
  }
  return load_annotation_layout(root, table, path, model_id);
}

Dataset load_coco(const std::string& path, const CategoryTable& table,
                  const std::string& model_id) {
  const json root = parse_file(path);
  if (root.is_array()) {
    return load_results_layout(root, table, path, model_id);
  }
  if (root.is_object()) {
    return load_annotation_layout(root, table, path, model_id);
  }
  throw ValidationError(path + ": expected a COCO annotation object or results array");
}

void write_coco(const Dataset& data, const std::string& path) {
  json root = json::object();

  json categories = json::array();
  for (const auto& cat : data.categories.entries()) {
    categories.push_back({{"id", cat.id}, {"name", cat.name}});
  }
  root["categories"] = std::move(categories);

  json images = json::array();
  for (const auto& img : data.images) {
    json rec = {{"id", id_to_json(img.id)}, {"width", img.width}, {"height", img.height}};
    if (img.uri) {
      rec["file_name"] = *img.uri;
    }
    images.push_back(std::move(rec));
  }
  root["images"] = std::move(images);

  json annotations = json::array();
  long long next_id = 1;
  for (const auto& det : data.detections) {
    json rec = {
        {"id", next_id++},
        {"image_id", id_to_json(det.image)},
        {"category_id", det.category},
        {"bbox", {det.box.x, det.box.y, det.box.w, det.box.h}},
        {"area", area(det.box)},
        {"score", det.score},
    };
    if (!det.model.empty()) {
      rec["model_id"] = det.model;
    }
    annotations.push_back(std::move(rec));
  }
  root["annotations"] = std::move(annotations);

  dump_file(root, path);
}

void write_results(std::span<const Detection> dets, const std::string& path) {
  json root = json::array();
  for (const auto& det : dets) {
    json rec = {
        {"image_id", id_to_json(det.image)},
        {"category_id", det.category},
        {"bbox", {det.box.x, det.box.y, det.box.w, det.box.h}},
        {"score", det.score},
    };
    if (!det.model.empty()) {
      rec["model_id"] = det.model;
    }
    root.push_back(std::move(rec));
  }
  dump_file(root, path);
}

ModelRegistry load_registry(const std::string& path) {
  const json root = parse_file(path);
  if (!root.is_object() || !root.contains("models") || !root.at("models").is_array()) {
    throw ValidationError(path + ": registry needs a top-level models array");
  }

  std::set<std::string> names;
  for (const auto& rec : root.at("models")) {
    if (!rec.contains("categories") || !rec.at("categories").is_array()) {
      continue;   // reported with a position below
    }
    for (const auto& name : rec.at("categories")) {
      names.insert(name.get<std::string>());
    }
  }

  ModelRegistry registry;
  registry.categories = CategoryTable::from_names({names.begin(), names.end()});

  std::set<std::string> ids;
  const json& arr = root.at("models");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string context = where(path, "models", i);
    const json& rec = arr[i];
    if (!rec.contains("id") || !rec.at("id").is_string()) {
      throw ValidationError(context + ": model needs a string id");
    }
    ModelSpec model;
    model.id = rec.at("id").get<std::string>();
    if (!ids.insert(model.id).second) {
      throw ValidationError(context + ": duplicate model id '" + model.id + "'");
    }
    if (!rec.contains("categories") || !rec.at("categories").is_array() ||
        rec.at("categories").empty()) {
      throw ValidationError(context + ": model '" + model.id +
                            "' needs a nonempty categories array");
    }
    for (const auto& name : rec.at("categories")) {
      model.categories.insert(registry.categories.id_of(name.get<std::string>()));
    }
    if (rec.contains("endpoint")) {
      model.endpoint = rec.at("endpoint").get<std::string>();
    }
    if (rec.contains("predictions")) {
      model.predictions_path = rec.at("predictions").get<std::string>();
    }
    registry.models.push_back(std::move(model));
  }
  if (registry.models.empty()) {
    throw ValidationError(path + ": registry lists no models");
  }
  return registry;
}

void write_registry(const ModelRegistry& registry, const std::string& path) {
  json models = json::array();
  for (const auto& model : registry.models) {
    json rec = {{"id", model.id}};
    json cats = json::array();
    for (int cat : model.categories) {
      cats.push_back(registry.categories.name_of(cat));
    }
    rec["categories"] = std::move(cats);
    if (model.endpoint) {
      rec["endpoint"] = *model.endpoint;
    }
    if (model.predictions_path) {
      rec["predictions"] = *model.predictions_path;
    }
    models.push_back(std::move(rec));
  }
  dump_file(json{{"models", std::move(models)}}, path);
}

namespace {

std::vector<ClassLabel> parse_class_labels(const json& root, const CategoryTable& table,
                                           const std::string& path,
                                           const std::string& model_id) {
  if (!root.is_object() || !root.contains("labels") || !root.at("labels").is_array()) {
    throw ValidationError(path + ": classification file needs a labels array");
  }
  std::vector<ClassLabel> labels;
  const json& arr = root.at("labels");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string context = where(path, "labels", i);
    const json& rec = arr[i];
    if (!rec.contains("image_id") || !rec.contains("category")) {
      throw ValidationError(context + ": missing image_id or category");
    }
    ClassLabel label;
    label.image = id_to_string(rec.at("image_id"), context);
    try {
      label.category = table.id_of(rec.at("category").get<std::string>());
    } catch (const ValidationError& e) {
      throw ValidationError(context + ": " + e.what());
    }
    label.score = parse_score(rec, context);
    label.model = rec.contains("model_id") ? rec.at("model_id").get<std::string>() : model_id;
    if (rec.contains("probs")) {
      try {
        label.probs = ProbVector(rec.at("probs").get<std::vector<double>>());
      } catch (const ValidationError& e) {
        throw ValidationError(context + ": " + e.what());
      }
      if (label.probs->size() != table.size()) {
        throw ValidationError(context + ": probs length does not match the category table");
      }
    }
    labels.push_back(std::move(label));
  }
  return labels;
}

}  // namespace

std::vector<ClassLabel> load_class_labels(const std::string& path, const CategoryTable& table,
                                          const std::string& model_id) {
  return parse_class_labels(parse_file(path), table, path, model_id);
}

std::vector<ClassLabel> load_class_labels(const std::string& path, CategoryTable* table_out,
                                          const std::string& model_id) {
  const json root = parse_file(path);
  if (!root.is_object() || !root.contains("categories")) {
    throw ValidationError(path + ": classification file needs a categories block");
  }
  CategoryTable table;
  for (const auto& rec : root.at("categories")) {
    table.add(rec.at("id").get<int>(), rec.at("name").get<std::string>());
  }
  auto labels = parse_class_labels(root, table, path, model_id);
  if (table_out) {
    *table_out = std::move(table);
  }
  return labels;
}

void write_class_labels(std::span<const ClassLabel> labels, const CategoryTable& table,
                        const std::string& path) {
  json root = json::object();
  json categories = json::array();
  for (const auto& cat : table.entries()) {
    categories.push_back({{"id", cat.id}, {"name", cat.name}});
  }
  root["categories"] = std::move(categories);

  json arr = json::array();
  for (const auto& label : labels) {
    json rec = {
        {"image_id", id_to_json(label.image)},
        {"category", table.name_of(label.category)},
        {"score", label.score},
    };
    if (label.probs) {
      rec["probs"] = label.probs->probs();
    }
    if (!label.model.empty()) {
      rec["model_id"] = label.model;
    }
    arr.push_back(std::move(rec));
  }
  root["labels"] = std::move(arr);
  dump_file(root, path);
}

}  // namespace modelcomp
