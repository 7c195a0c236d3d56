// Reference inference endpoint implementing the documented wire schema.
// Serves predictions from a COCO file keyed by image id, for exercising the
// collect subcommand without a real model behind it.
//
//   stub_server --registry registry.json --model-id m1 --preds preds.json --port 8080
//
// Request:  POST /predict  {"image_id": "...", "width": W, "height": H, "uri": "..."?}
// Response: 200 {"detections": [{"category": "name", "bbox": [x,y,w,h], "score": s}]}

#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "modelcomp/io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Stub detection endpoint serving canned predictions"};
  std::string registry_path, model_id, preds_path, host = "127.0.0.1";
  int port = 8080;
  app.add_option("--registry", registry_path)->required();
  app.add_option("--model-id", model_id)->required();
  app.add_option("--preds", preds_path)->required();
  app.add_option("--host", host);
  app.add_option("--port", port);
  CLI11_PARSE(app, argc, argv);

  try {
    const modelcomp::ModelRegistry registry = modelcomp::load_registry(registry_path);
    const modelcomp::Dataset data =
        modelcomp::load_coco(preds_path, registry.categories, model_id);

    std::map<std::string, nlohmann::json> by_image;
    for (const auto& det : data.detections) {
      auto [it, fresh] = by_image.try_emplace(det.image, nlohmann::json::array());
      it->second.push_back({
          {"category", registry.categories.name_of(det.category)},
          {"bbox", {det.box.x, det.box.y, det.box.w, det.box.h}},
          {"score", det.score},
      });
    }

    httplib::Server server;
    server.Post("/predict", [&](const httplib::Request& req, httplib::Response& res) {
      nlohmann::json request;
      try {
        request = nlohmann::json::parse(req.body);
      } catch (const nlohmann::json::parse_error&) {
        res.status = 400;
        return;
      }
      std::string image_id;
      const auto& id = request.at("image_id");
      image_id = id.is_string() ? id.get<std::string>() : std::to_string(id.get<long long>());
      auto it = by_image.find(image_id);
      nlohmann::json response{
          {"detections", it == by_image.end() ? nlohmann::json::array() : it->second}};
      res.set_content(response.dump(), "application/json");
    });

    std::cout << "serving model '" << model_id << "' on " << host << ":" << port << "\n";
    if (!server.listen(host, port)) {
      std::cerr << "failed to bind " << host << ":" << port << "\n";
      return 3;
    }
  } catch (const modelcomp::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
