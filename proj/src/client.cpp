#include "modelcomp/client.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>
#include <unordered_map>

#include <httplib.h>
#include <json.hpp>

#include "modelcomp/io.hpp"

namespace modelcomp {

namespace {

using nlohmann::json;

struct Endpoint {
  std::string base;   // scheme://host[:port]
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) {
    throw ValidationError("endpoint '" + url + "' must include a scheme");
  }
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) {
    return {url, "/"};
  }
  return {url.substr(0, slash), url.substr(slash)};
}

json detection_to_checkpoint(const Detection& det, const CategoryTable& table) {
  return json{
      {"category", table.name_of(det.category)},
      {"bbox", {det.box.x, det.box.y, det.box.w, det.box.h}},
      {"score", det.score},
  };
}

std::vector<Detection> parse_response(const std::string& body, const ImageRef& image,
                                      const ModelSpec& model, const CategoryTable& table) {
  json root;
  try {
    root = json::parse(body);
  } catch (const json::parse_error& e) {
    throw EndpointError("endpoint returned malformed JSON for image '" + image.id +
                        "': " + e.what());
  }
  if (!root.is_object() || !root.contains("detections") || !root.at("detections").is_array()) {
    throw EndpointError("endpoint response for image '" + image.id +
                        "' lacks a detections array");
  }

  std::vector<Detection> dets;
  for (const auto& rec : root.at("detections")) {
    if (!rec.contains("category") || !rec.contains("bbox") || !rec.contains("score")) {
      throw EndpointError("endpoint response for image '" + image.id +
                          "' has a detection without category/bbox/score");
    }
    const std::string name = rec.at("category").get<std::string>();
    auto category = table.find(name);
    if (!category) {
      throw ValidationError("endpoint for model '" + model.id + "' returned category '" +
                            name + "' unknown to the registry (image '" + image.id + "')");
    }
    const json& b = rec.at("bbox");
    if (!b.is_array() || b.size() != 4) {
      throw EndpointError("endpoint response for image '" + image.id + "' has a bad bbox");
    }
    Detection det{
        image.id,
        BBox(b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()),
        *category,
        rec.at("score").get<double>(),
        model.id,
    };
    validate_detection(det, model);   // category within the declared set, score in range
    dets.push_back(std::move(det));
  }
  return dets;
}

std::unordered_map<std::string, std::vector<Detection>> load_checkpoint(
    const std::string& path, const ModelSpec& model, const CategoryTable& table) {
  std::unordered_map<std::string, std::vector<Detection>> done;
  std::ifstream in(path);
  if (!in) {
    return done;
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error&) {
      // A torn final line from an interrupted run; everything before it counts.
      break;
    }
    const std::string image = rec.at("image_id").get<std::string>();
    std::vector<Detection> dets;
    for (const auto& d : rec.at("detections")) {
      Detection det{
          image,
          BBox(d.at("bbox")[0].get<double>(), d.at("bbox")[1].get<double>(),
               d.at("bbox")[2].get<double>(), d.at("bbox")[3].get<double>()),
          table.id_of(d.at("category").get<std::string>()),
          d.at("score").get<double>(),
          model.id,
      };
      dets.push_back(std::move(det));
    }
    (void)line_no;
    done[image] = std::move(dets);
  }
  return done;
}

}  // namespace

void CollectionJob::validate() const {
  if (!model.endpoint) {
    throw ValidationError("model '" + model.id + "' has no endpoint to collect from");
  }
  if (parallelism < 1) {
    throw ValidationError("parallelism must be >= 1");
  }
  if (retry_budget < 0) {
    throw ValidationError("retry budget must be >= 0");
  }
  if (output_path.empty()) {
    throw ValidationError("collection job needs an output path");
  }
  for (const auto& image : corpus) {
    validate_image_ref(image);
  }
}

CollectionReport collect_predictions(const CollectionJob& job, const CategoryTable& table) {
  job.validate();
  const std::string checkpoint_path =
      job.checkpoint_path.empty() ? job.output_path + ".checkpoint" : job.checkpoint_path;
  const std::string manifest_path =
      job.manifest_path.empty() ? job.output_path + ".failures.json" : job.manifest_path;
  const Endpoint endpoint = split_endpoint(*job.model.endpoint);

  CollectionReport report;
  report.requested = job.corpus.size();

  auto done = load_checkpoint(checkpoint_path, job.model, table);

  // Rewrite the checkpoint from what was recovered so a torn line never
  // accumulates, then append completions as they arrive.
  std::ofstream checkpoint(checkpoint_path, std::ios::trunc);
  if (!checkpoint) {
    throw IoError("cannot open checkpoint '" + checkpoint_path + "' for writing");
  }
  for (const auto& [image_id, dets] : done) {
    json rec{{"image_id", image_id}, {"detections", json::array()}};
    for (const auto& d : dets) {
      rec["detections"].push_back(detection_to_checkpoint(d, table));
    }
    checkpoint << rec.dump() << '\n';
  }
  checkpoint.flush();

  struct Slot {
    bool completed = false;
    std::vector<Detection> dets;
    std::string error;
  };
  std::vector<Slot> slots(job.corpus.size());
  for (std::size_t i = 0; i < job.corpus.size(); ++i) {
    auto it = done.find(job.corpus[i].id);
    if (it != done.end()) {
      slots[i].completed = true;
      slots[i].dets = it->second;
      ++report.resumed;
    }
  }

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> retries{0};
  std::mutex sink;
  std::exception_ptr hard_error;

  auto worker = [&]() {
    httplib::Client client(endpoint.base);
    client.set_connection_timeout(10);
    client.set_read_timeout(30);
    httplib::Headers headers;
    if (job.bearer_token) {
      headers.emplace("Authorization", "Bearer " + *job.bearer_token);
    }

    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= job.corpus.size()) {
        return;
      }
      {
        std::lock_guard lock(sink);
        if (hard_error) {
          return;
        }
        if (slots[i].completed) {
          continue;
        }
      }
      const ImageRef& image = job.corpus[i];
      json request{{"image_id", image.id}, {"width", image.width}, {"height", image.height}};
      if (image.uri) {
        request["uri"] = *image.uri;
      }
      const std::string body = request.dump();

      std::string last_error;
      for (int attempt = 0; attempt <= job.retry_budget; ++attempt) {
        if (attempt > 0) {
          retries.fetch_add(1);
        }
        auto res = client.Post(endpoint.path, headers, body, "application/json");
        if (!res) {
          last_error = "transport error: " + httplib::to_string(res.error());
          continue;
        }
        if (res->status != 200) {
          last_error = "http status " + std::to_string(res->status);
          continue;
        }
        try {
          auto dets = parse_response(res->body, image, job.model, table);
          std::lock_guard lock(sink);
          slots[i].completed = true;
          slots[i].dets = std::move(dets);
          json rec{{"image_id", image.id}, {"detections", json::array()}};
          for (const auto& d : slots[i].dets) {
            rec["detections"].push_back(detection_to_checkpoint(d, table));
          }
          checkpoint << rec.dump() << '\n';
          checkpoint.flush();
          last_error.clear();
        } catch (...) {
          // Schema or validation problems are not transient: abort the run.
          std::lock_guard lock(sink);
          if (!hard_error) {
            hard_error = std::current_exception();
          }
          return;
        }
        break;
      }
      if (!last_error.empty()) {
        std::lock_guard lock(sink);
        slots[i].error = last_error;
      }
    }
  };

  std::vector<std::thread> threads;
  const std::size_t n_workers =
      std::min<std::size_t>(static_cast<std::size_t>(job.parallelism),
                            std::max<std::size_t>(job.corpus.size(), 1));
  threads.reserve(n_workers);
  for (std::size_t t = 0; t < n_workers; ++t) {
    threads.emplace_back(worker);
  }
  for (auto& t : threads) {
    t.join();
  }
  if (hard_error) {
    std::rethrow_exception(hard_error);
  }

  // Corpus-order assembly: the output is independent of completion order.
  std::vector<Detection> all;
  json failures = json::array();
  for (std::size_t i = 0; i < job.corpus.size(); ++i) {
    if (slots[i].completed) {
      all.insert(all.end(), slots[i].dets.begin(), slots[i].dets.end());
      ++report.collected;
    } else {
      ++report.failed;
      report.failed_images.push_back(job.corpus[i].id);
      failures.push_back(json{{"image_id", job.corpus[i].id},
                              {"error", slots[i].error},
                              {"attempts", job.retry_budget + 1}});
    }
  }
  report.collected -= report.resumed;
  report.retries = retries.load();

  write_results(all, job.output_path);

  if (report.failed == 0) {
    checkpoint.close();
    std::error_code ec;
    std::filesystem::remove(checkpoint_path, ec);
    std::filesystem::remove(manifest_path, ec);
  } else {
    json manifest{{"model_id", job.model.id},
                  {"endpoint", *job.model.endpoint},
                  {"failed", std::move(failures)}};
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) {
      throw IoError("cannot write failure manifest '" + manifest_path + "'");
    }
    out << manifest.dump(2) << '\n';
  }
  return report;
}

}  // namespace modelcomp
