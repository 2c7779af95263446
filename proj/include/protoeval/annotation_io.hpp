#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "protoeval/annotation.hpp"

namespace protoeval {

/// Maps class names to ids. A frozen index rejects names it does not know;
/// an open one appends them in first-seen order.
class ClassIndex {
public:
  ClassIndex() = default;
  explicit ClassIndex(std::vector<std::string> names, bool frozen = true);

  ClassId resolve(const std::string& name);
  const std::vector<std::string>& names() const noexcept { return names_; }
  bool frozen() const noexcept { return frozen_; }

private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, ClassId> ids_;
  bool frozen_ = false;
};

/// Rectangle-label XML (<annotation> with <filename>, <size> and <object>
/// elements holding <name> and <bndbox>). `fallback_id` is used when the
/// document has no <filename>. Unknown classes in a frozen index raise
/// ValidationError naming the class. Zero-area boxes are accepted here.
ImageRecord parse_rect_label_xml(std::string_view text, ClassIndex& classes,
                                 const std::string& fallback_id = {},
                                 ImageSource source = ImageSource::capture_system);

/// Line-oriented "class cx cy w h" labels, all normalized to [0,1]. Corners
/// that overshoot the frame are clamped to [0,W]x[0,H] and reported through
/// `warnings` when given.
std::vector<LabeledObject> parse_normalized_labels(std::string_view text, int image_width,
                                                   int image_height,
                                                   const std::vector<std::string>& class_names,
                                                   std::vector<std::string>* warnings = nullptr);

/// Inverse of parse_normalized_labels, at full double precision.
std::string format_normalized_labels(const std::vector<LabeledObject>& objects, int image_width,
                                     int image_height);

/// One class name per line; blank lines skipped.
std::vector<std::string> parse_class_names(std::string_view text);

DatasetManifest parse_manifest(std::string_view text);
std::string serialize_manifest(const DatasetManifest& manifest);

std::vector<DetectionSet> parse_detections(std::string_view text);
std::string serialize_detections(const std::vector<DetectionSet>& sets);

} // namespace protoeval
