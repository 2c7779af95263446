#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace protoeval {

using ClassId = std::size_t;

/// Axis-aligned rectangle in continuous pixel coordinates, origin top-left,
/// x rightward and y downward. Area is (x_max - x_min) * (y_max - y_min);
/// corners carry no inclusive/exclusive convention.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const noexcept { return x_max - x_min; }
  double height() const noexcept { return y_max - y_min; }
  double area() const noexcept { return width() * height(); }

  /// Finite, non-negative and with ordered corners.
  bool valid() const noexcept;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
  friend auto operator<=>(const BoundingBox&, const BoundingBox&) = default;
};

/// Throws ValidationError naming `what` if the box breaks its invariants.
void validate_box(const BoundingBox& box, const std::string& what);

struct LabeledObject {
  ClassId class_id = 0;
  BoundingBox box;

  friend bool operator==(const LabeledObject&, const LabeledObject&) = default;
};

struct Detection {
  ClassId class_id = 0;
  BoundingBox box;
  double confidence = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

enum class ImageSource { capture_system, web, material_sample };

std::string to_string(ImageSource source);
ImageSource image_source_from_string(const std::string& text);

struct CaptureMetadata {
  std::string capture_id;
  int view_index = 1; // camera 1..7 of the capture rig
  std::string captured_at; // RFC 3339
  std::string location;
  std::string author;
  int image_width = 1920;
  int image_height = 1080;

  friend bool operator==(const CaptureMetadata&, const CaptureMetadata&) = default;
};

struct ImageRecord {
  std::string image_id;
  ImageSource source = ImageSource::capture_system;
  std::optional<CaptureMetadata> capture;
  std::vector<LabeledObject> objects;
  bool is_negative = true;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct DatasetManifest {
  std::vector<std::string> class_names;
  std::vector<ImageRecord> images;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

struct DetectionSet {
  std::string image_id;
  std::vector<Detection> detections;

  friend bool operator==(const DetectionSet&, const DetectionSet&) = default;
};

bool is_rfc3339_timestamp(const std::string& text);

/// Checks every manifest invariant: unique non-empty class names, unique image
/// ids, is_negative consistent with objects, class ids in range, ground-truth
/// boxes valid with positive area, capture metadata in range.
/// Throws ValidationError on the first violation.
void validate_manifest(const DatasetManifest& manifest);

/// Confidence in [0,1], valid box. Class range is checked only when
/// `class_count` is given.
void validate_detection_set(const DetectionSet& set,
                            std::optional<std::size_t> class_count = std::nullopt);

} // namespace protoeval
