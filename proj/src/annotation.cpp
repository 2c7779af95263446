#include "protoeval/annotation.hpp"

#include <cmath>
#include <regex>
#include <unordered_set>

#include "protoeval/errors.hpp"

namespace protoeval {

bool BoundingBox::valid() const noexcept {
  for (double v : {x_min, y_min, x_max, y_max}) {
    if (!std::isfinite(v) || v < 0.0) {
      return false;
    }
  }
  return x_min <= x_max && y_min <= y_max;
}

void validate_box(const BoundingBox& box, const std::string& what) {
  for (double v : {box.x_min, box.y_min, box.x_max, box.y_max}) {
    if (!std::isfinite(v)) {
      throw ValidationError(what + ": non-finite coordinate");
    }
    if (v < 0.0) {
      throw ValidationError(what + ": negative coordinate");
    }
  }
  if (box.x_min > box.x_max) {
    throw ValidationError(what + ": x_min > x_max");
  }
  if (box.y_min > box.y_max) {
    throw ValidationError(what + ": y_min > y_max");
  }
}

std::string to_string(ImageSource source) {
  switch (source) {
  case ImageSource::capture_system:
    return "capture_system";
  case ImageSource::web:
    return "web";
  case ImageSource::material_sample:
    return "material_sample";
  }
  return "capture_system";
}

ImageSource image_source_from_string(const std::string& text) {
  if (text == "capture_system") {
    return ImageSource::capture_system;
  }
  if (text == "web") {
    return ImageSource::web;
  }
  if (text == "material_sample") {
    return ImageSource::material_sample;
  }
  throw ValidationError("unknown image source '" + text + "'");
}

bool is_rfc3339_timestamp(const std::string& text) {
  static const std::regex pattern(
      R"(^(\d{4})-(\d{2})-(\d{2})[Tt ](\d{2}):(\d{2}):(\d{2})(\.\d+)?([Zz]|[+-](\d{2}):(\d{2}))$)");
  std::smatch m;
  if (!std::regex_match(text, m, pattern)) {
    return false;
  }
  auto field = [&](int i) { return std::stoi(m[i].str()); };
  int month = field(2);
  int day = field(3);
  if (month < 1 || month > 12 || day < 1 || day > 31) {
    return false;
  }
  // Leap second allowed.
  if (field(4) > 23 || field(5) > 59 || field(6) > 60) {
    return false;
  }
  if (m[9].matched && (field(9) > 23 || field(10) > 59)) {
    return false;
  }
  return true;
}

void validate_manifest(const DatasetManifest& manifest) {
  if (manifest.class_names.empty() && !manifest.images.empty()) {
    throw ValidationError("class_names must not be empty");
  }
  std::unordered_set<std::string> names;
  for (const auto& name : manifest.class_names) {
    if (name.empty()) {
      throw ValidationError("class_names: empty class name");
    }
    if (!names.insert(name).second) {
      throw ValidationError("class_names: duplicate class '" + name + "'");
    }
  }

  std::unordered_set<std::string> ids;
  for (const auto& image : manifest.images) {
    const std::string where = "image '" + image.image_id + "'";
    if (image.image_id.empty()) {
      throw ValidationError("image with empty image_id");
    }
    if (!ids.insert(image.image_id).second) {
      throw ValidationError("duplicate image_id '" + image.image_id + "'");
    }
    if (image.is_negative != image.objects.empty()) {
      throw ValidationError(where + ": is_negative=" + (image.is_negative ? "true" : "false") +
                            " but " + std::to_string(image.objects.size()) + " object(s)");
    }
    if (image.capture) {
      const auto& c = *image.capture;
      if (c.view_index < 1 || c.view_index > 7) {
        throw ValidationError(where + ": view_index " + std::to_string(c.view_index) +
                              " outside [1, 7]");
      }
      if (c.image_width <= 0 || c.image_height <= 0) {
        throw ValidationError(where + ": image size must be positive");
      }
      if (!is_rfc3339_timestamp(c.captured_at)) {
        throw ValidationError(where + ": captured_at '" + c.captured_at +
                              "' is not an RFC 3339 timestamp");
      }
    }
    for (std::size_t i = 0; i < image.objects.size(); ++i) {
      const auto& object = image.objects[i];
      const std::string what = where + " object " + std::to_string(i);
      if (object.class_id >= manifest.class_names.size()) {
        throw ValidationError(what + ": class_id " + std::to_string(object.class_id) +
                              " out of range");
      }
      validate_box(object.box, what);
      if (!(object.box.area() > 0.0)) {
        throw ValidationError(what + ": zero-area ground-truth box");
      }
    }
  }
}

void validate_detection_set(const DetectionSet& set, std::optional<std::size_t> class_count) {
  if (set.image_id.empty()) {
    throw ValidationError("detection set with empty image_id");
  }
  for (std::size_t i = 0; i < set.detections.size(); ++i) {
    const auto& d = set.detections[i];
    const std::string what = "image '" + set.image_id + "' detection " + std::to_string(i);
    if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) {
      throw ValidationError(what + ": confidence outside [0, 1]");
    }
    if (class_count && d.class_id >= *class_count) {
      throw ValidationError(what + ": class_id " + std::to_string(d.class_id) + " out of range");
    }
    validate_box(d.box, what);
  }
}

} // namespace protoeval
