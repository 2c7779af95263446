#include "protoeval/annotation_io.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <json.hpp>

#include "protoeval/errors.hpp"
#include "protoeval/text_format.hpp"

namespace protoeval {

using nlohmann::json;

ClassIndex::ClassIndex(std::vector<std::string> names, bool frozen)
    : names_(std::move(names)), frozen_(frozen) {
  for (ClassId i = 0; i < names_.size(); ++i) {
    if (!ids_.emplace(names_[i], i).second) {
      throw ValidationError("duplicate class name '" + names_[i] + "'");
    }
  }
}

ClassId ClassIndex::resolve(const std::string& name) {
  if (auto it = ids_.find(name); it != ids_.end()) {
    return it->second;
  }
  if (frozen_) {
    throw ValidationError("unknown class name '" + name + "'");
  }
  ClassId id = names_.size();
  names_.push_back(name);
  ids_.emplace(name, id);
  return id;
}

// ---------------------------------------------------------------------------
// Rectangle-label XML
// ---------------------------------------------------------------------------

namespace {

namespace pt = boost::property_tree;

double xml_number(const pt::ptree& node, const std::string& key, const std::string& path) {
  auto child = node.get_child_optional(key);
  if (!child) {
    throw ParseError("missing element", std::nullopt, path + "." + key);
  }
  auto value = parse_double(child->get_value<std::string>());
  if (!value) {
    throw ParseError("expected a number, got '" + child->get_value<std::string>() + "'",
                     std::nullopt, path + "." + key);
  }
  return *value;
}

} // namespace

ImageRecord parse_rect_label_xml(std::string_view text, ClassIndex& classes,
                                 const std::string& fallback_id, ImageSource source) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(text)};
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    std::optional<std::size_t> line;
    if (e.line() > 0) {
      line = e.line();
    }
    throw ParseError(e.message(), line);
  }

  auto root = tree.get_child_optional("annotation");
  if (!root) {
    throw ParseError("missing <annotation> root element", std::nullopt, "annotation");
  }

  ImageRecord record;
  record.source = source;
  record.image_id = trim(root->get<std::string>("filename", fallback_id));
  if (record.image_id.empty()) {
    record.image_id = fallback_id;
  }
  if (record.image_id.empty()) {
    throw ParseError("no <filename> and no fallback image id", std::nullopt,
                     "annotation.filename");
  }

  auto size = root->get_child_optional("size");
  if (!size) {
    throw ParseError("missing element", std::nullopt, "annotation.size");
  }
  double width = xml_number(*size, "width", "annotation.size");
  double height = xml_number(*size, "height", "annotation.size");
  if (!(width > 0.0) || !(height > 0.0)) {
    throw ValidationError("annotation.size: image size must be positive");
  }

  std::size_t index = 0;
  for (const auto& [key, node] : *root) {
    if (key != "object") {
      continue;
    }
    const std::string path = "annotation.object[" + std::to_string(index++) + "]";
    std::string name{trim(node.get<std::string>("name", ""))};
    if (name.empty()) {
      throw ParseError("missing class name", std::nullopt, path + ".name");
    }
    auto bndbox = node.get_child_optional("bndbox");
    if (!bndbox) {
      throw ParseError("missing element", std::nullopt, path + ".bndbox");
    }
    const std::string box_path = path + ".bndbox";
    LabeledObject object;
    object.box = {xml_number(*bndbox, "xmin", box_path), xml_number(*bndbox, "ymin", box_path),
                  xml_number(*bndbox, "xmax", box_path), xml_number(*bndbox, "ymax", box_path)};
    validate_box(object.box, box_path);
    object.class_id = classes.resolve(name);
    record.objects.push_back(object);
  }
  record.is_negative = record.objects.empty();
  return record;
}

// ---------------------------------------------------------------------------
// Normalized line labels
// ---------------------------------------------------------------------------

std::vector<LabeledObject> parse_normalized_labels(std::string_view text, int image_width,
                                                   int image_height,
                                                   const std::vector<std::string>& class_names,
                                                   std::vector<std::string>* warnings) {
  if (image_width <= 0 || image_height <= 0) {
    throw ValidationError("image dimensions must be positive");
  }
  const double w_px = image_width;
  const double h_px = image_height;

  std::vector<LabeledObject> objects;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields_in(line);
    std::vector<std::string> fields;
    for (std::string f; fields_in >> f;) {
      fields.push_back(f);
    }
    if (fields.empty()) {
      continue;
    }
    if (fields.size() != 5) {
      throw ParseError("expected 5 fields, got " + std::to_string(fields.size()), line_no);
    }
    auto class_index = parse_integer(fields[0]);
    if (!class_index) {
      throw ParseError("class index is not an integer: '" + fields[0] + "'", line_no, "class");
    }
    if (*class_index < 0 || static_cast<std::size_t>(*class_index) >= class_names.size()) {
      throw ValidationError("line " + std::to_string(line_no) + ": class index " +
                            std::to_string(*class_index) + " out of range");
    }
    static constexpr const char* names[] = {"class", "center_x", "center_y", "width", "height"};
    double values[4];
    for (int i = 0; i < 4; ++i) {
      auto v = parse_double(fields[i + 1]);
      if (!v) {
        throw ParseError("not a number: '" + fields[i + 1] + "'", line_no, names[i + 1]);
      }
      if (*v < 0.0 || *v > 1.0) {
        throw ValidationError("line " + std::to_string(line_no) + ": " + names[i + 1] + " " +
                              fields[i + 1] + " outside [0, 1]");
      }
      values[i] = *v;
    }
    const auto [cx, cy, w, h] = values;
    BoundingBox raw{(cx - w / 2.0) * w_px, (cy - h / 2.0) * h_px, (cx + w / 2.0) * w_px,
                    (cy + h / 2.0) * h_px};
    BoundingBox box{std::clamp(raw.x_min, 0.0, w_px), std::clamp(raw.y_min, 0.0, h_px),
                    std::clamp(raw.x_max, 0.0, w_px), std::clamp(raw.y_max, 0.0, h_px)};
    if (box != raw && warnings) {
      warnings->push_back("line " + std::to_string(line_no) + ": box clamped to image frame");
    }
    objects.push_back({static_cast<ClassId>(*class_index), box});
  }
  return objects;
}

std::string format_normalized_labels(const std::vector<LabeledObject>& objects, int image_width,
                                     int image_height) {
  if (image_width <= 0 || image_height <= 0) {
    throw ValidationError("image dimensions must be positive");
  }
  std::string out;
  for (const auto& o : objects) {
    const double w = image_width;
    const double h = image_height;
    out += std::to_string(o.class_id);
    for (double v : {(o.box.x_min + o.box.x_max) / 2.0 / w, (o.box.y_min + o.box.y_max) / 2.0 / h,
                     o.box.width() / w, o.box.height() / h}) {
      out += ' ';
      out += format_shortest(v);
    }
    out += '\n';
  }
  return out;
}

std::vector<std::string> parse_class_names(std::string_view text) {
  std::vector<std::string> names;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) {
    auto name = trim(line);
    if (!name.empty()) {
      names.emplace_back(name);
    }
  }
  return names;
}

// ---------------------------------------------------------------------------
// JSON documents
// ---------------------------------------------------------------------------

namespace {

std::size_t line_of_byte(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + byte, '\n'));
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(e.what(), line_of_byte(text, e.byte));
  }
}

const json& require(const json& object, const char* key, const std::string& path) {
  auto it = object.find(key);
  if (it == object.end()) {
    throw ParseError("missing required field", std::nullopt, path + "." + key);
  }
  return *it;
}

void reject_unknown_keys(const json& object, std::initializer_list<const char*> allowed,
                         const std::string& path) {
  for (const auto& item : object.items()) {
    if (std::none_of(allowed.begin(), allowed.end(),
                     [&](const char* k) { return item.key() == k; })) {
      throw ParseError("unknown field", std::nullopt, path + "." + item.key());
    }
  }
}

const json& expect_object(const json& value, const std::string& path) {
  if (!value.is_object()) {
    throw ParseError("expected an object", std::nullopt, path);
  }
  return value;
}

const json& expect_array(const json& value, const std::string& path) {
  if (!value.is_array()) {
    throw ParseError("expected an array", std::nullopt, path);
  }
  return value;
}

std::string get_string(const json& object, const char* key, const std::string& path) {
  const json& v = require(object, key, path);
  if (!v.is_string()) {
    throw ParseError("expected a string", std::nullopt, path + "." + key);
  }
  return v.get<std::string>();
}

double get_number(const json& object, const char* key, const std::string& path) {
  const json& v = require(object, key, path);
  if (!v.is_number()) {
    throw ParseError("expected a number", std::nullopt, path + "." + key);
  }
  return v.get<double>();
}

long long get_integer(const json& object, const char* key, const std::string& path) {
  const json& v = require(object, key, path);
  if (!v.is_number_integer()) {
    throw ParseError("expected an integer", std::nullopt, path + "." + key);
  }
  return v.get<long long>();
}

ClassId get_class_id(const json& object, const std::string& path) {
  long long id = get_integer(object, "class_id", path);
  if (id < 0) {
    throw ValidationError(path + ".class_id: negative class id");
  }
  return static_cast<ClassId>(id);
}

bool get_bool(const json& object, const char* key, const std::string& path) {
  const json& v = require(object, key, path);
  if (!v.is_boolean()) {
    throw ParseError("expected a boolean", std::nullopt, path + "." + key);
  }
  return v.get<bool>();
}

BoundingBox get_box(const json& object, const std::string& path) {
  const std::string box_path = path + ".box";
  const json& b = expect_object(require(object, "box", path), box_path);
  reject_unknown_keys(b, {"x_min", "y_min", "x_max", "y_max"}, box_path);
  return {get_number(b, "x_min", box_path), get_number(b, "y_min", box_path),
          get_number(b, "x_max", box_path), get_number(b, "y_max", box_path)};
}

std::string quoted(const std::string& text) { return json(text).dump(); }

std::string box_text(const BoundingBox& box, std::string (*number)(double)) {
  return R"({"x_min": )" + number(box.x_min) + R"(, "y_min": )" + number(box.y_min) +
         R"(, "x_max": )" + number(box.x_max) + R"(, "y_max": )" + number(box.y_max) + "}";
}

// Renders `items` one per line at `indent`, or "[]" when empty.
template <typename Range, typename Render>
std::string array_text(const Range& items, const std::string& indent, Render render) {
  if (items.empty()) {
    return "[]";
  }
  std::string out = "[\n";
  for (std::size_t i = 0; i < items.size(); ++i) {
    out += indent + "  " + render(items[i]);
    out += i + 1 < items.size() ? ",\n" : "\n";
  }
  return out + indent + "]";
}

} // namespace

DatasetManifest parse_manifest(std::string_view text) {
  const json doc = parse_json(text);
  expect_object(doc, "$");
  reject_unknown_keys(doc, {"class_names", "images"}, "$");

  DatasetManifest manifest;
  const json& names = expect_array(require(doc, "class_names", "$"), "$.class_names");
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!names[i].is_string()) {
      throw ParseError("expected a string", std::nullopt,
                       "$.class_names[" + std::to_string(i) + "]");
    }
    manifest.class_names.push_back(names[i].get<std::string>());
  }

  const json& images = expect_array(require(doc, "images", "$"), "$.images");
  manifest.images.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string path = "$.images[" + std::to_string(i) + "]";
    const json& img = expect_object(images[i], path);
    reject_unknown_keys(img, {"image_id", "source", "capture", "objects", "is_negative"}, path);

    ImageRecord record;
    record.image_id = get_string(img, "image_id", path);
    try {
      record.source = image_source_from_string(get_string(img, "source", path));
    } catch (const ValidationError& e) {
      throw ValidationError(path + ".source: " + e.what());
    }
    if (auto it = img.find("capture"); it != img.end() && !it->is_null()) {
      const std::string cpath = path + ".capture";
      const json& c = expect_object(*it, cpath);
      reject_unknown_keys(c,
                          {"capture_id", "view_index", "captured_at", "location", "author",
                           "image_width", "image_height"},
                          cpath);
      CaptureMetadata meta;
      meta.capture_id = get_string(c, "capture_id", cpath);
      meta.view_index = static_cast<int>(get_integer(c, "view_index", cpath));
      meta.captured_at = get_string(c, "captured_at", cpath);
      meta.location = get_string(c, "location", cpath);
      meta.author = get_string(c, "author", cpath);
      meta.image_width = static_cast<int>(get_integer(c, "image_width", cpath));
      meta.image_height = static_cast<int>(get_integer(c, "image_height", cpath));
      record.capture = std::move(meta);
    }
    const json& objects = expect_array(require(img, "objects", path), path + ".objects");
    for (std::size_t j = 0; j < objects.size(); ++j) {
      const std::string opath = path + ".objects[" + std::to_string(j) + "]";
      const json& o = expect_object(objects[j], opath);
      reject_unknown_keys(o, {"class_id", "box"}, opath);
      record.objects.push_back({get_class_id(o, opath), get_box(o, opath)});
    }
    record.is_negative = get_bool(img, "is_negative", path);
    manifest.images.push_back(std::move(record));
  }

  validate_manifest(manifest);
  return manifest;
}

std::string serialize_manifest(const DatasetManifest& manifest) {
  validate_manifest(manifest);

  std::string out = "{\n  \"class_names\": ";
  if (manifest.class_names.empty()) {
    out += "[]";
  } else {
    out += "[";
    for (std::size_t i = 0; i < manifest.class_names.size(); ++i) {
      out += (i ? ", " : "") + quoted(manifest.class_names[i]);
    }
    out += "]";
  }
  out += ",\n  \"images\": ";
  out += array_text(manifest.images, "  ", [](const ImageRecord& image) {
    std::string s = "{\n";
    s += "      \"image_id\": " + quoted(image.image_id) + ",\n";
    s += "      \"source\": " + quoted(to_string(image.source)) + ",\n";
    if (image.capture) {
      const auto& c = *image.capture;
      s += "      \"capture\": {\"capture_id\": " + quoted(c.capture_id) +
           ", \"view_index\": " + std::to_string(c.view_index) +
           ", \"captured_at\": " + quoted(c.captured_at) + ", \"location\": " +
           quoted(c.location) + ", \"author\": " + quoted(c.author) +
           ", \"image_width\": " + std::to_string(c.image_width) +
           ", \"image_height\": " + std::to_string(c.image_height) + "},\n";
    }
    s += "      \"objects\": " + array_text(image.objects, "      ", [](const LabeledObject& o) {
           return "{\"class_id\": " + std::to_string(o.class_id) +
                  ", \"box\": " + box_text(o.box, format_canonical) + "}";
         });
    s += ",\n      \"is_negative\": ";
    s += image.is_negative ? "true" : "false";
    return s + "\n    }";
  });
  return out + "\n}\n";
}

std::vector<DetectionSet> parse_detections(std::string_view text) {
  const json doc = parse_json(text);
  expect_array(doc, "$");

  std::vector<DetectionSet> sets;
  sets.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string path = "$[" + std::to_string(i) + "]";
    const json& entry = expect_object(doc[i], path);
    reject_unknown_keys(entry, {"image_id", "detections"}, path);
    DetectionSet set;
    set.image_id = get_string(entry, "image_id", path);
    const json& dets = expect_array(require(entry, "detections", path), path + ".detections");
    for (std::size_t j = 0; j < dets.size(); ++j) {
      const std::string dpath = path + ".detections[" + std::to_string(j) + "]";
      const json& d = expect_object(dets[j], dpath);
      reject_unknown_keys(d, {"class_id", "box", "confidence"}, dpath);
      set.detections.push_back(
          {get_class_id(d, dpath), get_box(d, dpath), get_number(d, "confidence", dpath)});
    }
    validate_detection_set(set);
    sets.push_back(std::move(set));
  }
  return sets;
}

std::string serialize_detections(const std::vector<DetectionSet>& sets) {
  for (const auto& set : sets) {
    validate_detection_set(set);
  }
  return array_text(sets, "",
                    [](const DetectionSet& set) {
                      std::string s = "{\n    \"image_id\": " + quoted(set.image_id) +
                                      ",\n    \"detections\": ";
                      s += array_text(set.detections, "    ", [](const Detection& d) {
                        return "{\"class_id\": " + std::to_string(d.class_id) +
                               ", \"box\": " + box_text(d.box, format_shortest) +
                               ", \"confidence\": " + format_shortest(d.confidence) + "}";
                      });
                      return s + "\n  }";
                    }) +
         "\n";
}

} // namespace protoeval
