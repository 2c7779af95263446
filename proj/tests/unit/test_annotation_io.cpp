#include <doctest.h>

#include <random>

#include "oracle/scene_generator.hpp"
#include "protoeval/annotation_io.hpp"
#include "protoeval/errors.hpp"

using namespace protoeval;

namespace {

std::string voc(const std::string& objects) {
  return "<annotation>\n  <filename>proto_0001.jpg</filename>\n"
         "  <size><width>1920</width><height>1080</height><depth>3</depth></size>\n" +
         objects + "</annotation>\n";
}

std::string voc_object(const std::string& name, int x0, int y0, int x1, int y1) {
  return "  <object><name>" + name + "</name><bndbox><xmin>" + std::to_string(x0) +
         "</xmin><ymin>" + std::to_string(y0) + "</ymin><xmax>" + std::to_string(x1) +
         "</xmax><ymax>" + std::to_string(y1) + "</ymax></bndbox></object>\n";
}

} // namespace

TEST_CASE("rectangle XML: one object maps fields directly") {
  ClassIndex classes({"mdf"});
  auto r = parse_rect_label_xml(voc(voc_object("mdf", 10, 20, 110, 220)), classes);
  CHECK(r.image_id == "proto_0001.jpg");
  REQUIRE(r.objects.size() == 1);
  CHECK(r.objects[0].class_id == 0);
  CHECK(r.objects[0].box == BoundingBox{10, 20, 110, 220});
  CHECK_FALSE(r.is_negative);
}

TEST_CASE("rectangle XML: no objects is a negative image") {
  ClassIndex classes({"mdf"});
  auto r = parse_rect_label_xml(voc(""), classes);
  CHECK(r.objects.empty());
  CHECK(r.is_negative);
}

TEST_CASE("rectangle XML: errors") {
  ClassIndex classes({"mdf"});
  CHECK_THROWS_AS(parse_rect_label_xml(voc(voc_object("mdf", 110, 220, 10, 20)), classes),
                  ValidationError);
  CHECK_THROWS_WITH_AS(parse_rect_label_xml(voc(voc_object("plywood", 1, 2, 3, 4)), classes),
                       doctest::Contains("plywood"), ValidationError);

  try {
    parse_rect_label_xml("<annotation>\n<size><width>1</width>\n</annotation>", classes);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line().has_value());
  }

  try {
    parse_rect_label_xml(voc("  <object><name>mdf</name><bndbox><xmin>a</xmin><ymin>1</ymin>"
                             "<xmax>2</xmax><ymax>3</ymax></bndbox></object>\n"),
                         classes);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.field() == "annotation.object[0].bndbox.xmin");
  }
  CHECK_THROWS_AS(parse_rect_label_xml("<annotation><filename>x</filename></annotation>", classes),
                  ParseError);
}

TEST_CASE("rectangle XML: an open class index learns names in order") {
  ClassIndex open;
  auto r = parse_rect_label_xml(
      voc(voc_object("plywood", 0, 0, 5, 5) + voc_object("mdf", 1, 1, 6, 6) +
          voc_object("plywood", 2, 2, 7, 7)),
      open);
  CHECK(open.names() == std::vector<std::string>{"plywood", "mdf"});
  CHECK(r.objects[2].class_id == 0);
}

TEST_CASE("normalized labels convert center/size to corners") {
  const std::vector<std::string> names{"mdf"};
  auto full = parse_normalized_labels("0 0.5 0.5 1.0 1.0\n", 1920, 1080, names);
  REQUIRE(full.size() == 1);
  CHECK(full[0].box == BoundingBox{0, 0, 1920, 1080});

  // cx = 104 px, w = 208 px at 416x416.
  auto quarter = parse_normalized_labels("0 0.25 0.25 0.5 0.5", 416, 416, names);
  CHECK(quarter[0].box == BoundingBox{0, 0, 208, 208});

  CHECK(parse_normalized_labels("", 416, 416, names).empty());
  CHECK(parse_normalized_labels("\n  \n", 416, 416, names).empty());
}

TEST_CASE("normalized labels: clamping and errors") {
  const std::vector<std::string> names{"mdf", "plywood"};
  std::vector<std::string> warnings;
  auto clamped = parse_normalized_labels("1 0.05 0.5 0.2 0.2", 100, 100, names, &warnings);
  CHECK(clamped[0].box.x_min == 0.0);
  CHECK(clamped[0].box.x_max == doctest::Approx(15.0));
  CHECK(warnings.size() == 1);

  try {
    parse_normalized_labels("0 0.5 0.5 0.1\n", 100, 100, names);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 1u);
  }
  CHECK_THROWS_AS(parse_normalized_labels("0 0.5 0.5 0.1 0.1\n2 0.5 0.5 0.1 0.1", 100, 100, names),
                  ValidationError);
  CHECK_THROWS_AS(parse_normalized_labels("0 1.5 0.5 0.1 0.1", 100, 100, names), ValidationError);
  CHECK_THROWS_AS(parse_normalized_labels("0 0.5 0.5 0.1 0.1", 0, 100, names), ValidationError);
  CHECK_THROWS_AS(parse_normalized_labels("x 0.5 0.5 0.1 0.1", 10, 100, names), ParseError);
}

TEST_CASE("normalized labels invert within 1e-9 of the frame") {
  std::mt19937_64 rng(5);
  const std::vector<std::string> names{"a", "b", "c"};
  for (int trial = 0; trial < 500; ++trial) {
    const int w = testgen::uniform_int(rng, 1, 4000);
    const int h = testgen::uniform_int(rng, 1, 4000);
    std::vector<LabeledObject> objects;
    for (int k = testgen::uniform_int(rng, 0, 6); k > 0; --k) {
      double x0 = testgen::uniform(rng, 0, w);
      double y0 = testgen::uniform(rng, 0, h);
      objects.push_back({static_cast<ClassId>(testgen::uniform_int(rng, 0, 2)),
                         {x0, y0, testgen::uniform(rng, x0, w), testgen::uniform(rng, y0, h)}});
    }
    auto back = parse_normalized_labels(format_normalized_labels(objects, w, h), w, h, names);
    REQUIRE(back.size() == objects.size());
    const double tol = 1e-9 * std::max(w, h);
    for (std::size_t i = 0; i < objects.size(); ++i) {
      CHECK(back[i].class_id == objects[i].class_id);
      CHECK(std::abs(back[i].box.x_min - objects[i].box.x_min) <= tol);
      CHECK(std::abs(back[i].box.y_min - objects[i].box.y_min) <= tol);
      CHECK(std::abs(back[i].box.x_max - objects[i].box.x_max) <= tol);
      CHECK(std::abs(back[i].box.y_max - objects[i].box.y_max) <= tol);
    }
  }
}

TEST_CASE("manifest: empty manifest round-trips byte-identically") {
  DatasetManifest m;
  m.class_names = {"mdf"};
  const std::string text = serialize_manifest(m);
  CHECK(text == "{\n  \"class_names\": [\"mdf\"],\n  \"images\": []\n}\n");
  CHECK(serialize_manifest(parse_manifest(text)) == text);
}

TEST_CASE("manifest: two images, one negative, round-trip preserves every field") {
  DatasetManifest m;
  m.class_names = {"mdf", "plywood"};
  ImageRecord pos{"cap17_v3.jpg", ImageSource::capture_system,
                  CaptureMetadata{"cap17", 3, "2019-03-12T09:30:00Z", "lab", "team 4", 1920, 1080},
                  {{1, {10.5, 20.25, 110.125, 220.0000006}}},
                  false};
  ImageRecord neg{"web_2.png", ImageSource::web, std::nullopt, {}, true};
  m.images = {pos, neg};
  const std::string text = serialize_manifest(m);
  CHECK(text.find("\"x_max\": 110.125") != std::string::npos);
  CHECK(text.find("\"y_max\": 220.000001") != std::string::npos);
  auto back = parse_manifest(text);
  CHECK(back.images.size() == 2);
  CHECK(back.images[0].capture == pos.capture);
  CHECK(back.images[1] == neg);
  CHECK(serialize_manifest(back) == text);
}

TEST_CASE("manifest: validation errors") {
  const std::string negative_with_object = R"({"class_names": ["mdf"], "images": [
    {"image_id": "a", "source": "web", "objects": [{"class_id": 0, "box": {"x_min": 0, "y_min": 0, "x_max": 1, "y_max": 1}}], "is_negative": true}]})";
  CHECK_THROWS_AS(parse_manifest(negative_with_object), ValidationError);

  const std::string duplicate = R"({"class_names": ["mdf"], "images": [
    {"image_id": "a", "source": "web", "objects": [], "is_negative": true},
    {"image_id": "a", "source": "web", "objects": [], "is_negative": true}]})";
  CHECK_THROWS_WITH_AS(parse_manifest(duplicate), doctest::Contains("duplicate image_id"),
                       ValidationError);

  const std::string zero_area = R"({"class_names": ["mdf"], "images": [
    {"image_id": "a", "source": "web", "objects": [{"class_id": 0, "box": {"x_min": 3, "y_min": 0, "x_max": 3, "y_max": 1}}], "is_negative": false}]})";
  CHECK_THROWS_WITH_AS(parse_manifest(zero_area), doctest::Contains("zero-area"), ValidationError);

  const std::string bad_view = R"({"class_names": ["mdf"], "images": [
    {"image_id": "a", "source": "capture_system", "capture": {"capture_id": "c", "view_index": 8, "captured_at": "2019-03-01T00:00:00Z", "location": "", "author": "", "image_width": 1920, "image_height": 1080}, "objects": [], "is_negative": true}]})";
  CHECK_THROWS_AS(parse_manifest(bad_view), ValidationError);

  const std::string class_range = R"({"class_names": ["mdf"], "images": [
    {"image_id": "a", "source": "web", "objects": [{"class_id": 1, "box": {"x_min": 0, "y_min": 0, "x_max": 1, "y_max": 1}}], "is_negative": false}]})";
  CHECK_THROWS_AS(parse_manifest(class_range), ValidationError);

  CHECK_THROWS_AS(parse_manifest(R"({"class_names": ["mdf", "mdf"], "images": []})"),
                  ValidationError);
  CHECK_THROWS_AS(parse_manifest(R"({"class_names": ["mdf"]})"), ParseError);
  CHECK_THROWS_AS(parse_manifest(R"({"class_names": ["mdf"], "images": [], "extra": 1})"),
                  ParseError);
  try {
    parse_manifest("{\n  \"class_names\": [\"mdf\"],\n  \"images\": [\n}\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4u);
  }
}

TEST_CASE("manifest: randomized parse/serialize round trip") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    auto m = testgen::random_manifest(rng);
    const std::string text = serialize_manifest(m);
    auto back = parse_manifest(text);
    CHECK(back == m);
    CHECK(serialize_manifest(back) == text);
  }
}

TEST_CASE("detections: parse, empty sets and confidence checks") {
  auto sets = parse_detections(R"([{"image_id": "a", "detections": [
      {"class_id": 0, "box": {"x_min": 1, "y_min": 2, "x_max": 3, "y_max": 4}, "confidence": 0.97}]},
      {"image_id": "b", "detections": []}])");
  REQUIRE(sets.size() == 2);
  CHECK(sets[0].detections.size() == 1);
  CHECK(sets[0].detections[0].confidence == 0.97);
  CHECK(sets[1].detections.empty());

  CHECK_THROWS_AS(parse_detections(R"([{"image_id": "a", "detections": [
      {"class_id": 0, "box": {"x_min": 1, "y_min": 2, "x_max": 3, "y_max": 4}, "confidence": 1.5}]}])"),
                  ValidationError);
  CHECK_THROWS_AS(parse_detections(R"([{"detections": []}])"), ParseError);
}

TEST_CASE("detections keep full confidence precision") {
  std::vector<DetectionSet> sets{{"a", {{0, {0.1, 0.2, 3.0000000001, 4}, 0.123456789012345}}}};
  auto text = serialize_detections(sets);
  CHECK(parse_detections(text) == sets);
  CHECK(serialize_detections({}) == "[]\n");
}
