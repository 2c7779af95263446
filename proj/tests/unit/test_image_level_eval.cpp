#include <doctest.h>

#include <random>

#include "oracle/scene_generator.hpp"
#include "protoeval/errors.hpp"
#include "protoeval/image_level_eval.hpp"
#include "protoeval/text_format.hpp"

using namespace protoeval;

namespace {

ImageRecord positive(const std::string& id) {
  return {id, ImageSource::capture_system, std::nullopt, {{0, {100, 100, 200, 200}}}, false};
}

ImageRecord negative(const std::string& id) {
  return {id, ImageSource::capture_system, std::nullopt, {}, true};
}

std::vector<ImageOutcome> outcomes_for(const ConfusionCounts& c) {
  std::vector<ImageOutcome> out;
  int serial = 0;
  auto add = [&](std::int64_t n, Outcome o) {
    for (std::int64_t i = 0; i < n; ++i) {
      out.push_back({"img" + std::to_string(serial++), 0, o, std::nullopt, std::nullopt});
    }
  };
  add(c.tp, Outcome::true_positive);
  add(c.fp, Outcome::false_positive);
  add(c.tn, Outcome::true_negative);
  add(c.fn, Outcome::false_negative);
  return out;
}

std::string render(std::optional<double> v) { return v ? format_fixed(*v, 3) : "undefined"; }

} // namespace

TEST_CASE("classify_image under the existence policy") {
  EvalConfig config;
  const auto policy = ImagePolicy::existence();
  CHECK(classify_image(positive("a"), {"a", {{0, {0, 0, 10, 10}, 0.9}}}, config, policy).outcome ==
        Outcome::true_positive);
  CHECK(classify_image(negative("e"), {"e", {}}, config, policy).outcome ==
        Outcome::true_negative);
  CHECK(classify_image(positive("a"), {"a", {{0, {100, 100, 200, 200}, 0.4}}}, config, policy)
            .outcome == Outcome::false_negative);
  CHECK(classify_image(negative("e"), {"e", {{0, {0, 0, 10, 10}, 0.51}}}, config, policy).outcome ==
        Outcome::false_positive);
  // "More than" the threshold: equality does not fire.
  CHECK(classify_image(positive("a"), {"a", {{0, {100, 100, 200, 200}, 0.5}}}, config, policy)
            .outcome == Outcome::false_negative);
  CHECK_THROWS_AS(classify_image(positive("a"), {"b", {}}, config, policy), ValidationError);
}

TEST_CASE("classify_image under the localized policy") {
  EvalConfig config;
  const auto policy = ImagePolicy::localized(0.5);
  auto off_target =
      classify_image(positive("a"), {"a", {{0, {0, 0, 10, 10}, 0.9}}}, config, policy);
  CHECK(off_target.outcome == Outcome::false_negative);
  CHECK(*off_target.best_iou == 0.0);
  auto on_target =
      classify_image(positive("a"), {"a", {{0, {100, 100, 200, 190}, 0.9}}}, config, policy);
  CHECK(on_target.outcome == Outcome::true_positive);
  CHECK(*on_target.best_iou == doctest::Approx(0.9));
  CHECK(*on_target.best_confidence == 0.9);
  // A negative image has nothing to localize against.
  CHECK(classify_image(negative("e"), {"e", {{0, {0, 0, 10, 10}, 0.9}}}, config, policy).outcome ==
        Outcome::true_negative);

  CHECK(parse_policy("localized:0.3").min_iou == 0.3);
  CHECK(to_string(parse_policy("localized:0.25")) == "localized:0.25");
  CHECK_THROWS_AS(parse_policy("localized:2"), ValidationError);
  CHECK_THROWS_AS(parse_policy("strict"), ValidationError);
}

TEST_CASE("negative images only yield FP/TN, positive images only TP/FN") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    auto scene = testgen::random_scene(rng);
    for (const auto& policy : {ImagePolicy::existence(), ImagePolicy::localized(0.5)}) {
      auto outcomes = evaluate_images(scene.manifest, scene.detections, EvalConfig{}, policy);
      CHECK(outcomes.size() == scene.manifest.images.size() * scene.manifest.class_names.size());
      for (const auto& o : outcomes) {
        const auto& image = *std::find_if(
            scene.manifest.images.begin(), scene.manifest.images.end(),
            [&](const ImageRecord& r) { return r.image_id == o.image_id; });
        bool has_class = std::any_of(image.objects.begin(), image.objects.end(),
                                     [&](const LabeledObject& x) { return x.class_id == o.class_id; });
        if (has_class) {
          CHECK((o.outcome == Outcome::true_positive || o.outcome == Outcome::false_negative));
        } else {
          CHECK((o.outcome == Outcome::false_positive || o.outcome == Outcome::true_negative));
        }
      }
    }
  }
}

TEST_CASE("aggregate counts outcomes") {
  ConfusionCounts model_a{72, 4, 168, 3};
  auto a = outcomes_for(model_a);
  CHECK(a.size() == 247);
  CHECK(aggregate(a) == model_a);
  CHECK(aggregate({}) == ConfusionCounts{});
  ConfusionCounts model_d{72, 0, 101, 22};
  CHECK(aggregate(outcomes_for(model_d)) == model_d);
  CHECK(outcomes_for(model_d).size() == 195);

  a.push_back(a.front());
  CHECK_THROWS_AS(aggregate(a), ValidationError);
}

TEST_CASE("metrics at three decimals") {
  auto a = metrics({72, 4, 168, 3});
  CHECK(render(a.precision) == "0.947");
  CHECK(render(a.recall) == "0.960");
  CHECK(render(a.accuracy) == "0.972");

  auto d = metrics({72, 0, 101, 22});
  CHECK(render(d.precision) == "1.000");
  CHECK(render(d.recall) == "0.766");
  CHECK(render(d.accuracy) == "0.887");

  auto none = metrics({});
  CHECK_FALSE(none.precision.has_value());
  CHECK_FALSE(none.recall.has_value());
  CHECK_FALSE(none.accuracy.has_value());
}

TEST_CASE("precision and recall ignore true negatives; accuracy grows with them") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    ConfusionCounts c{testgen::uniform_int(rng, 0, 50), testgen::uniform_int(rng, 0, 50),
                      testgen::uniform_int(rng, 0, 50), testgen::uniform_int(rng, 0, 50)};
    ConfusionCounts more = c;
    more.tn += testgen::uniform_int(rng, 1, 20);
    auto m0 = metrics(c);
    auto m1 = metrics(more);
    CHECK(m0.precision == m1.precision);
    CHECK(m0.recall == m1.recall);
    REQUIRE(m1.accuracy.has_value());
    if (m0.accuracy) {
      CHECK(*m1.accuracy >= *m0.accuracy);
    }
    for (auto v : {m1.precision, m1.recall, m1.accuracy}) {
      if (v) {
        CHECK(*v >= 0.0);
        CHECK(*v <= 1.0);
      }
    }
  }
}

TEST_CASE("per-image and summary reports") {
  std::vector<ImageOutcome> outcomes{{"a", 0, Outcome::true_positive, 0.9, 0.8},
                                     {"b", 0, Outcome::true_negative, std::nullopt, std::nullopt}};
  CHECK(per_image_csv(outcomes, {"mdf"}) ==
        "image_id,class,outcome,best_confidence,best_iou\n"
        "a,mdf,true_positive,0.9,0.8\n"
        "b,mdf,true_negative,,\n");
  std::vector<ConfusionRow> rows{{"Model A", {72, 4, 168, 3}}};
  CHECK(confusion_summary_csv(rows) ==
        "class,tp,fp,tn,fn,precision,recall,accuracy\nModel A,72,4,168,3,0.947,0.960,0.972\n");
  CHECK(render_confusion_table(rows).find("Model A\t72\t4\t168\t3\t0.947\t0.960\t0.972") !=
        std::string::npos);
}
