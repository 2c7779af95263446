#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "protoeval/annotation.hpp"
#include "protoeval/match_metrics.hpp"

namespace protoeval {

enum class Outcome { true_positive, false_positive, true_negative, false_negative };

std::string to_string(Outcome outcome);

/// existence: any detection above the confidence threshold fires.
/// localized: it must also overlap some ground truth with IoU >= min_iou.
struct ImagePolicy {
  enum class Kind { existence, localized };
  Kind kind = Kind::existence;
  double min_iou = 0.5;

  static ImagePolicy existence() { return {}; }
  static ImagePolicy localized(double min_iou) { return {Kind::localized, min_iou}; }
};

/// "existence" or "localized:<iou>".
ImagePolicy parse_policy(const std::string& text);
std::string to_string(const ImagePolicy& policy);

struct ImageOutcome {
  std::string image_id;
  ClassId class_id = 0;
  Outcome outcome = Outcome::true_negative;
  std::optional<double> best_confidence; // over all detections of the class
  std::optional<double> best_iou;        // over firing detections against ground truth
};

/// Binary evaluation of one class in one image.
ImageOutcome classify_image(const ImageRecord& record, const DetectionSet& detections,
                            const EvalConfig& config, const ImagePolicy& policy,
                            ClassId class_id = 0);

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;

  std::int64_t total() const noexcept { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Throws ValidationError when an (image, class) pair appears twice.
ConfusionCounts aggregate(std::span<const ImageOutcome> outcomes);

struct ImageLevelMetrics {
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> accuracy;
};

ImageLevelMetrics metrics(const ConfusionCounts& counts);

/// Every manifest image against every class. Images without a detection set
/// have no detections. Outcomes are ordered by class, then image id.
std::vector<ImageOutcome> evaluate_images(const DatasetManifest& manifest,
                                          std::span<const DetectionSet> detection_sets,
                                          const EvalConfig& config, const ImagePolicy& policy,
                                          const EvalOptions& options = {});

/// image_id,class,outcome,best_confidence,best_iou
std::string per_image_csv(std::span<const ImageOutcome> outcomes,
                          const std::vector<std::string>& class_names);

struct ConfusionRow {
  std::string label;
  ConfusionCounts counts;
};

/// class,tp,fp,tn,fn,precision,recall,accuracy with three-decimal metrics.
std::string confusion_summary_csv(std::span<const ConfusionRow> rows);

/// Tab-separated table: label, the four counts, precision, recall, accuracy.
std::string render_confusion_table(std::span<const ConfusionRow> rows);

} // namespace protoeval
