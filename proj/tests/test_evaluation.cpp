#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "modelcomp/evaluation.hpp"
#include "modelcomp/simharness.hpp"
#include "support/random_instances.hpp"
#include "support/reference_eval.hpp"

using namespace modelcomp;

namespace {

Detection det(const std::string& image, const BBox& box, int category, double score,
              const std::string& model = "m1") {
  return Detection{image, box, category, score, model};
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("matching basics") {
  const BBox box(10, 10, 20, 20);

  SUBCASE("identical sets match completely") {
    std::vector<Detection> truths{det("img1", box, 1, 1.0, ""),
                                  det("img2", BBox(0, 0, 5, 5), 2, 1.0, "")};
    std::vector<Detection> preds{det("img1", box, 1, 0.9),
                                 det("img2", BBox(0, 0, 5, 5), 2, 0.8)};
    auto result = match_detections(preds, truths, 0.5);
    CHECK(result.matched == 2);
    CHECK(result.pred_truth[0] == 0);
    CHECK(result.pred_truth[1] == 1);
  }

  SUBCASE("category gate blocks overlapping boxes") {
    std::vector<Detection> truths{det("img1", box, 1, 1.0, "")};
    std::vector<Detection> preds{det("img1", box, 2, 0.9)};
    CHECK(match_detections(preds, truths, 0.5).matched == 0);
  }

  SUBCASE("image gate blocks same-looking boxes on other images") {
    std::vector<Detection> truths{det("img1", box, 1, 1.0, "")};
    std::vector<Detection> preds{det("img2", box, 1, 0.9)};
    CHECK(match_detections(preds, truths, 0.5).matched == 0);
  }

  SUBCASE("two predictions over one truth: higher score wins") {
    std::vector<Detection> truths{det("img1", box, 1, 1.0, "")};
    std::vector<Detection> preds{det("img1", box, 1, 0.6), det("img1", box, 1, 0.9)};
    auto result = match_detections(preds, truths, 0.5);
    CHECK(result.matched == 1);
    CHECK(result.pred_truth[0] == -1);   // the lower-score duplicate is the false positive
    CHECK(result.pred_truth[1] == 0);

    // Oracle: over all one-to-one assignments of <=3 boxes, greedy
    // score-descending matching is the unique protocol outcome.
    for (int flip = 0; flip < 2; ++flip) {
      std::vector<Detection> shuffled = preds;
      if (flip) {
        std::swap(shuffled[0], shuffled[1]);
      }
      auto r = match_detections(shuffled, truths, 0.5);
      CHECK(r.matched == 1);
      CHECK(r.pred_truth[flip ? 0 : 1] == 0);
    }
  }

  SUBCASE("prediction prefers the highest-IoU unmatched truth") {
    std::vector<Detection> truths{det("img1", BBox(0, 0, 10, 10), 1, 1.0, ""),
                                  det("img1", BBox(2, 2, 10, 10), 1, 1.0, "")};
    std::vector<Detection> preds{det("img1", BBox(1.5, 1.5, 10, 10), 1, 0.9)};
    auto result = match_detections(preds, truths, 0.5);
    CHECK(result.matched == 1);
    CHECK(result.pred_truth[0] == 1);
  }
}

TEST_CASE("average precision on hand-enumerated cases") {
  const BBox a(0, 0, 10, 10);
  const BBox b(50, 50, 10, 10);

  SUBCASE("perfect detector") {
    std::vector<Detection> truths{det("img1", a, 1, 1.0, ""), det("img1", b, 1, 1.0, "")};
    std::vector<Detection> preds{det("img1", a, 1, 0.9), det("img1", b, 1, 0.8)};
    auto ap = average_precision(preds, truths, 0.5);
    REQUIRE(ap.has_value());
    CHECK(*ap == 1.0);
  }

  SUBCASE("zero true positives") {
    std::vector<Detection> truths{det("img1", a, 1, 1.0, "")};
    std::vector<Detection> preds{det("img1", BBox(80, 80, 5, 5), 1, 0.9)};
    auto ap = average_precision(preds, truths, 0.5);
    REQUIRE(ap.has_value());
    CHECK(*ap == 0.0);
    CHECK(*average_precision({}, truths, 0.5) == 0.0);
  }

  SUBCASE("one TP then one FP over two truths") {
    // PR curve by hand: point 1 (r=0.5, p=1), point 2 (r=0.5, p=0.5).
    // Interpolated precision is 1 for r <= 0.5, 0 beyond: AP = 51/101.
    std::vector<Detection> truths{det("img1", a, 1, 1.0, ""), det("img1", b, 1, 1.0, "")};
    std::vector<Detection> preds{det("img1", a, 1, 0.9),
                                 det("img1", BBox(80, 80, 5, 5), 1, 0.8)};
    auto ap = average_precision(preds, truths, 0.5);
    REQUIRE(ap.has_value());
    CHECK(std::abs(*ap - 51.0 / 101.0) < 1e-12);
  }

  SUBCASE("no ground truth: undefined") {
    std::vector<Detection> preds{det("img1", a, 1, 0.9)};
    CHECK_FALSE(average_precision(preds, {}, 0.5).has_value());
  }
}

TEST_CASE("mean_ap on exact and empty predictions") {
  CategoryTable table = CategoryTable::from_names({"x", "y"});
  std::vector<Detection> truths{det("img1", BBox(0, 0, 10, 10), 1, 1.0, ""),
                                det("img1", BBox(30, 30, 12, 12), 2, 1.0, ""),
                                det("img2", BBox(5, 5, 8, 8), 1, 1.0, "")};

  auto perfect = mean_ap(truths, truths, table);
  CHECK(perfect.map_5095 == 1.0);
  CHECK(perfect.matched == truths.size());
  CHECK(perfect.unmatched_preds == 0);
  CHECK(perfect.unmatched_truths == 0);
  for (const auto& [thr, ap] : perfect.per_iou_ap) {
    CHECK(ap == 1.0);
  }

  auto nothing = mean_ap({}, truths, table);
  CHECK(nothing.map_5095 == 0.0);

  CHECK_THROWS_AS(static_cast<void>(mean_ap(truths, {}, table)), ValidationError);
}

TEST_CASE("mean_ap equals the mean of both breakdowns") {
  gen::Rng rng(7030);
  for (int round = 0; round < 50; ++round) {
    auto registry = gen::random_registry(rng, 3, 4);
    auto corpus = gen::random_corpus(rng, 4);
    auto per_model = gen::random_predictions(rng, registry, corpus, 3);
    std::vector<Detection> truths;
    std::vector<Detection> preds;
    for (const auto& list : per_model) {
      for (std::size_t i = 0; i < list.size(); ++i) {
        if (i % 2 == 0) {
          Detection t = list[i];
          t.score = 1.0;
          t.model.clear();
          truths.push_back(t);
        } else {
          preds.push_back(list[i]);
        }
      }
    }
    if (truths.empty()) continue;

    auto report = mean_ap(preds, truths, registry.categories);
    double from_iou = 0.0;
    for (const auto& [thr, ap] : report.per_iou_ap) {
      from_iou += ap;
      CHECK(ap >= 0.0);
      CHECK(ap <= 1.0);
    }
    CHECK(report.map_5095 == doctest::Approx(from_iou / 10.0).epsilon(1e-12));

    double from_cats = 0.0;
    for (const auto& [cat, ap] : report.per_category_ap) {
      from_cats += ap;
      CHECK(ap >= 0.0);
      CHECK(ap <= 1.0);
    }
    if (!report.per_category_ap.empty()) {
      CHECK(report.map_5095 ==
            doctest::Approx(from_cats / report.per_category_ap.size()).epsilon(1e-12));
    }
  }
}

TEST_CASE("false positives never help, matched true positives never hurt") {
  gen::Rng rng(7031);
  for (int round = 0; round < 100; ++round) {
    auto corpus = gen::random_corpus(rng, 3);
    std::vector<Detection> truths;
    std::vector<Detection> preds;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (const auto& image : corpus) {
      const int n = std::uniform_int_distribution<int>(1, 4)(rng);
      for (int i = 0; i < n; ++i) {
        const BBox box = gen::random_box(rng);
        truths.push_back(det(image.id, box, 1, 1.0, ""));
        if (unit(rng) < 0.6) {
          preds.push_back(det(image.id, box, 1, unit(rng)));
        }
      }
    }
    const double base = average_precision(preds, truths, 0.5).value();

    // Add a far-away false positive.
    auto with_fp = preds;
    with_fp.push_back(det(corpus[0].id, BBox(900, 900, 5, 5), 1, unit(rng)));
    CHECK(average_precision(with_fp, truths, 0.5).value() <= base + 1e-12);

    // Add a prediction exactly on an unmatched truth.
    auto matching = match_detections(preds, truths, 0.5);
    int unmatched = -1;
    for (std::size_t t = 0; t < truths.size(); ++t) {
      if (!matching.truth_matched[t]) {
        unmatched = static_cast<int>(t);
        break;
      }
    }
    if (unmatched >= 0) {
      auto with_tp = preds;
      with_tp.push_back(det(truths[static_cast<std::size_t>(unmatched)].image,
                            truths[static_cast<std::size_t>(unmatched)].box, 1, unit(rng)));
      CHECK(average_precision(with_tp, truths, 0.5).value() >= base - 1e-12);
    }
  }
}

TEST_CASE("scores only matter through their ranking") {
  gen::Rng rng(7032);
  auto registry = gen::random_registry(rng, 2, 3);
  auto corpus = gen::random_corpus(rng, 3);
  auto per_model = gen::random_predictions(rng, registry, corpus, 3);
  std::vector<Detection> preds;
  std::vector<Detection> truths;
  for (const auto& list : per_model) {
    for (std::size_t i = 0; i < list.size(); ++i) {
      (i % 2 ? preds : truths).push_back(list[i]);
    }
  }
  for (auto& t : truths) {
    t.score = 1.0;
  }
  if (truths.empty() || preds.empty()) {
    return;
  }
  auto before = mean_ap(preds, truths, registry.categories);
  for (auto& p : preds) {
    p.score *= 0.5;   // uniform positive rescaling preserves the ranking
  }
  auto after = mean_ap(preds, truths, registry.categories);
  CHECK(before.map_5095 == doctest::Approx(after.map_5095).epsilon(1e-12));
}

TEST_CASE("agrees with the independent reference evaluator on synthetic scenes") {
  std::vector<std::string> names;
  for (int i = 1; i <= 6; ++i) {
    names.push_back("cat" + std::to_string(i));
  }
  const Dataset truth = generate_scenes(4242, 60, names, 3);
  std::set<int> all;
  for (const auto& c : truth.categories.entries()) {
    all.insert(c.id);
  }
  NoiseModel noise;
  noise.jitter = 0.08;
  noise.miss_rate = 0.15;
  noise.fp_rate = 0.4;
  noise.seed = 99;
  const SynthResult detector = synth_detector(truth, "m1", all, noise);

  const EvalReport mine = mean_ap(detector.detections, truth.detections, truth.categories);
  const double theirs = refeval::mean_ap_5095(detector.detections, truth.detections);
  CHECK(std::abs(mine.map_5095 - theirs) < 1e-4);
  CHECK(mine.map_5095 < 1.0);   // noise must cost something
}

TEST_CASE("top-1 accuracy and coverage") {
  using Pseudo = std::vector<std::pair<std::string, std::optional<int>>>;
  const std::vector<std::pair<std::string, int>> truths{
      {"a", 1}, {"b", 2}, {"c", 3}, {"d", 1}, {"e", 2}};

  SUBCASE("all correct") {
    Pseudo pseudo{{"a", 1}, {"b", 2}, {"c", 3}, {"d", 1}, {"e", 2}};
    auto r = top1_accuracy(pseudo, truths);
    CHECK(r.accuracy == 1.0);
    CHECK(r.coverage == 1.0);
  }

  SUBCASE("all wrong") {
    Pseudo pseudo{{"a", 2}, {"b", 3}, {"c", 1}, {"d", 2}, {"e", 3}};
    auto r = top1_accuracy(pseudo, truths);
    CHECK(r.accuracy == 0.0);
    CHECK(r.coverage == 1.0);
  }

  SUBCASE("3 correct of 4 voted, 1 abstained of 5") {
    Pseudo pseudo{{"a", 1}, {"b", 2}, {"c", 3}, {"d", 2}, {"e", std::nullopt}};
    auto r = top1_accuracy(pseudo, truths);
    CHECK(r.accuracy == doctest::Approx(0.75));
    CHECK(r.coverage == doctest::Approx(0.8));
    CHECK(r.abstained == 1);

    // An absent pseudo-label counts as abstention too.
    Pseudo partial{{"a", 1}, {"b", 2}, {"c", 3}, {"d", 2}};
    auto r2 = top1_accuracy(partial, truths);
    CHECK(r2.accuracy == doctest::Approx(0.75));
    CHECK(r2.coverage == doctest::Approx(0.8));
  }

  SUBCASE("unknown image rejected") {
    Pseudo pseudo{{"zz", 1}};
    CHECK_THROWS_AS(static_cast<void>(top1_accuracy(pseudo, truths)), ValidationError);
  }
}

}  // TEST_SUITE
