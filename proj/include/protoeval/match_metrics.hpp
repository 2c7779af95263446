#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "protoeval/annotation.hpp"

namespace protoeval {

enum class Interpolation { all_point, eleven_point };

std::string to_string(Interpolation interpolation);
Interpolation interpolation_from_string(const std::string& text);

struct EvalConfig {
  std::vector<double> iou_thresholds{0.5, 0.75};
  /// Per-image evaluation keeps detections with confidence strictly above
  /// this value. AP sweeps every detection regardless.
  double confidence_threshold = 0.5;
  Interpolation interpolation = Interpolation::all_point;
};

/// Thresholds in (0,1], sorted and unique; confidence threshold in [0,1].
void validate_config(const EvalConfig& config);

/// Intersection over union; 0 when both boxes have zero area.
/// Throws ValidationError for invalid boxes.
double iou(const BoundingBox& a, const BoundingBox& b);

enum class MatchFlag { true_positive, false_positive };

struct DetectionMatch {
  std::size_t detection_index = 0; // into the caller's detection list
  double confidence = 0.0;
  MatchFlag flag = MatchFlag::false_positive;
  std::optional<std::size_t> ground_truth_index; // into the caller's ground-truth list
  double iou = 0.0; // overlap with the matched ground truth, 0 for false positives
};

/// Matches of one class in one image, in visiting order.
struct MatchResult {
  std::vector<DetectionMatch> detections;
  std::size_t ground_truth_count = 0;
  std::size_t unmatched_ground_truths = 0;

  std::size_t true_positives() const noexcept;
  std::size_t false_positives() const noexcept;
};

/// Greedy matching for one class. Detections are visited by descending
/// confidence (ties by input order); each takes the still-unmatched ground
/// truth with the highest IoU at or above `iou_threshold` (ties to the lower
/// index), otherwise it is a false positive. Objects and detections of other
/// classes are ignored. A second detection on an already-claimed object is a
/// false positive.
MatchResult match_detections(std::span<const LabeledObject> ground_truths,
                             std::span<const Detection> detections, double iou_threshold,
                             ClassId class_id);

/// One detection in the pooled, confidence-ordered sweep.
struct RankedMatch {
  double confidence = 0.0;
  MatchFlag flag = MatchFlag::false_positive;
};

struct PrPoint {
  double confidence = 0.0;
  std::size_t true_positives = 0; // in the prefix ending at this detection
  std::size_t rank = 0;           // prefix length, 1-based
  double recall = 0.0;
  double precision = 0.0;
};

struct PrecisionRecallCurve {
  std::vector<PrPoint> points;
  std::size_t total_ground_truths = 0;
};

/// Pools per-image matches into one sweep: descending confidence, then image
/// id, then the per-image visiting order. Independent of the order of `images`.
struct ImageMatches {
  std::string image_id;
  MatchResult matches;
};
std::vector<RankedMatch> pool_matches(std::span<const ImageMatches> images);

/// One point per prefix of `ranked` (already in sweep order). Empty when
/// `total_ground_truths` is zero, since recall is undefined there.
PrecisionRecallCurve precision_recall_curve(std::span<const RankedMatch> ranked,
                                            std::size_t total_ground_truths);

/// Area under the monotone precision envelope (all-point), or the mean of the
/// envelope at recall 0, 0.1, ..., 1 (eleven-point). nullopt when the curve
/// has no ground truths.
std::optional<double> average_precision(const PrecisionRecallCurve& curve,
                                        Interpolation interpolation);

struct ApResult {
  ClassId class_id = 0;
  double iou_threshold = 0.5;
  std::optional<double> ap; // undefined for classes without ground truth
  std::size_t n_gt = 0;
  std::size_t n_det = 0;
  std::size_t n_tp = 0;
  std::size_t n_fp = 0;
  PrecisionRecallCurve curve;
};

struct MapResult {
  double iou_threshold = 0.5;
  std::optional<double> map; // undefined when no class has ground truth
  std::vector<ApResult> per_class;
};

struct EvalOptions {
  std::size_t threads = 1;
  /// Drop detection sets whose image is not in the manifest instead of failing.
  bool ignore_missing = false;
};

/// Detection sets whose ids are not in the manifest. Sorted, unique.
std::vector<std::string> unresolved_image_ids(const DatasetManifest& manifest,
                                              std::span<const DetectionSet> detection_sets);

/// mAP per configured IoU threshold. Each image is matched independently per
/// class, the matches are pooled into one sweep per class, and mAP is the
/// unweighted mean of AP over classes that have ground truth. Images without
/// a detection set contribute ground truth only. Throws ValidationError for
/// unresolved image ids (unless ignored), duplicate detection sets or class
/// ids outside the manifest.
std::vector<MapResult> mean_average_precision(const DatasetManifest& manifest,
                                              std::span<const DetectionSet> detection_sets,
                                              const EvalConfig& config,
                                              const EvalOptions& options = {});

/// class,iou_threshold,ap,n_gt,n_det,n_tp,n_fp rows, then one "mAP" summary
/// row per threshold. AP and mAP use three decimals; undefined cells are empty.
std::string map_report_csv(const std::vector<MapResult>& results,
                           const std::vector<std::string>& class_names);

/// class,iou_threshold,confidence,recall,precision for every curve point.
std::string pr_curve_csv(const std::vector<MapResult>& results,
                         const std::vector<std::string>& class_names);

/// One column of a threshold-by-dataset mAP table.
struct MapColumn {
  std::string label;
  std::vector<std::pair<double, std::optional<double>>> values; // (threshold, mAP)
};

/// Tab-separated table with one "mAP @ <t> IoU" row per threshold, three
/// decimals per cell. Rows follow the first column's threshold order.
std::string render_map_table(const std::vector<MapColumn>& columns);

} // namespace protoeval
