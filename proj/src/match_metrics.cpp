#include "protoeval/match_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "protoeval/errors.hpp"
#include "protoeval/parallel.hpp"
#include "protoeval/text_format.hpp"

namespace protoeval {

std::string to_string(Interpolation interpolation) {
  return interpolation == Interpolation::all_point ? "all" : "eleven";
}

Interpolation interpolation_from_string(const std::string& text) {
  if (text == "all" || text == "all_point") {
    return Interpolation::all_point;
  }
  if (text == "eleven" || text == "eleven_point" || text == "11") {
    return Interpolation::eleven_point;
  }
  throw ValidationError("unknown interpolation '" + text + "' (expected all or eleven)");
}

void validate_config(const EvalConfig& config) {
  if (config.iou_thresholds.empty()) {
    throw ValidationError("at least one IoU threshold is required");
  }
  for (std::size_t i = 0; i < config.iou_thresholds.size(); ++i) {
    double t = config.iou_thresholds[i];
    if (!(t > 0.0 && t <= 1.0)) {
      throw ValidationError("IoU threshold " + format_shortest(t) + " outside (0, 1]");
    }
    if (i > 0 && !(config.iou_thresholds[i - 1] < t)) {
      throw ValidationError("IoU thresholds must be sorted and unique");
    }
  }
  if (!(config.confidence_threshold >= 0.0 && config.confidence_threshold <= 1.0)) {
    throw ValidationError("confidence threshold outside [0, 1]");
  }
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  validate_box(a, "first box");
  validate_box(b, "second box");
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  const double inter = (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
  const double uni = a.area() + b.area() - inter;
  if (!(uni > 0.0)) {
    return 0.0;
  }
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::size_t MatchResult::true_positives() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(detections.begin(), detections.end(),
                    [](const DetectionMatch& m) { return m.flag == MatchFlag::true_positive; }));
}

std::size_t MatchResult::false_positives() const noexcept {
  return detections.size() - true_positives();
}

MatchResult match_detections(std::span<const LabeledObject> ground_truths,
                             std::span<const Detection> detections, double iou_threshold,
                             ClassId class_id) {
  std::vector<std::size_t> gt_indices;
  for (std::size_t i = 0; i < ground_truths.size(); ++i) {
    if (ground_truths[i].class_id == class_id) {
      gt_indices.push_back(i);
    }
  }
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    if (detections[i].class_id == class_id) {
      order.push_back(i);
    }
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].confidence > detections[b].confidence;
  });

  MatchResult result;
  result.ground_truth_count = gt_indices.size();
  std::vector<bool> claimed(gt_indices.size(), false);
  for (std::size_t d : order) {
    DetectionMatch m;
    m.detection_index = d;
    m.confidence = detections[d].confidence;
    std::optional<std::size_t> best;
    double best_iou = -1.0;
    for (std::size_t k = 0; k < gt_indices.size(); ++k) {
      if (claimed[k]) {
        continue;
      }
      double overlap = iou(detections[d].box, ground_truths[gt_indices[k]].box);
      if (overlap >= iou_threshold && overlap > best_iou) {
        best = k;
        best_iou = overlap;
      }
    }
    if (best) {
      claimed[*best] = true;
      m.flag = MatchFlag::true_positive;
      m.ground_truth_index = gt_indices[*best];
      m.iou = best_iou;
    }
    result.detections.push_back(m);
  }
  result.unmatched_ground_truths =
      static_cast<std::size_t>(std::count(claimed.begin(), claimed.end(), false));
  return result;
}

std::vector<RankedMatch> pool_matches(std::span<const ImageMatches> images) {
  struct Entry {
    double confidence;
    const std::string* image_id;
    std::size_t position;
    MatchFlag flag;
  };
  std::vector<Entry> entries;
  for (const auto& image : images) {
    for (std::size_t p = 0; p < image.matches.detections.size(); ++p) {
      const auto& m = image.matches.detections[p];
      entries.push_back({m.confidence, &image.image_id, p, m.flag});
    }
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.confidence != b.confidence) {
      return a.confidence > b.confidence;
    }
    if (*a.image_id != *b.image_id) {
      return *a.image_id < *b.image_id;
    }
    return a.position < b.position;
  });
  std::vector<RankedMatch> ranked;
  ranked.reserve(entries.size());
  for (const auto& e : entries) {
    ranked.push_back({e.confidence, e.flag});
  }
  return ranked;
}

PrecisionRecallCurve precision_recall_curve(std::span<const RankedMatch> ranked,
                                            std::size_t total_ground_truths) {
  PrecisionRecallCurve curve;
  curve.total_ground_truths = total_ground_truths;
  if (total_ground_truths == 0) {
    return curve;
  }
  curve.points.reserve(ranked.size());
  std::size_t tp = 0;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    if (ranked[k].flag == MatchFlag::true_positive) {
      ++tp;
    }
    const std::size_t rank = k + 1;
    curve.points.push_back({ranked[k].confidence, tp, rank,
                            static_cast<double>(tp) / static_cast<double>(total_ground_truths),
                            static_cast<double>(tp) / static_cast<double>(rank)});
  }
  return curve;
}

std::optional<double> average_precision(const PrecisionRecallCurve& curve,
                                        Interpolation interpolation) {
  const std::size_t total = curve.total_ground_truths;
  if (total == 0) {
    return std::nullopt;
  }
  const auto& pts = curve.points;

  // envelope[k] = max precision over points k..end (recall is non-decreasing).
  std::vector<double> envelope(pts.size());
  double running = 0.0;
  for (std::size_t k = pts.size(); k-- > 0;) {
    running = std::max(running, pts[k].precision);
    envelope[k] = running;
  }

  if (interpolation == Interpolation::all_point) {
    double area = 0.0;
    std::size_t previous_tp = 0;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      if (pts[k].true_positives > previous_tp) {
        area += static_cast<double>(pts[k].true_positives - previous_tp) * envelope[k];
        previous_tp = pts[k].true_positives;
      }
    }
    return area / static_cast<double>(total);
  }

  // Recall >= level/10 is tested as 10*tp >= level*total to stay exact.
  double sum = 0.0;
  std::size_t k = 0;
  for (std::size_t level = 0; level <= 10; ++level) {
    while (k < pts.size() && 10 * pts[k].true_positives < level * total) {
      ++k;
    }
    if (k < pts.size()) {
      sum += envelope[k];
    }
  }
  return sum / 11.0;
}

// ---------------------------------------------------------------------------
// Dataset-level evaluation
// ---------------------------------------------------------------------------

std::vector<std::string> unresolved_image_ids(const DatasetManifest& manifest,
                                              std::span<const DetectionSet> detection_sets) {
  std::set<std::string> known;
  for (const auto& image : manifest.images) {
    known.insert(image.image_id);
  }
  std::set<std::string> missing;
  for (const auto& set : detection_sets) {
    if (!known.contains(set.image_id)) {
      missing.insert(set.image_id);
    }
  }
  return {missing.begin(), missing.end()};
}

namespace {

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (const auto& id : ids) {
    out += (out.empty() ? "" : ", ") + id;
  }
  return out;
}

} // namespace

std::vector<MapResult> mean_average_precision(const DatasetManifest& manifest,
                                              std::span<const DetectionSet> detection_sets,
                                              const EvalConfig& config,
                                              const EvalOptions& options) {
  validate_config(config);
  if (auto missing = unresolved_image_ids(manifest, detection_sets);
      !missing.empty() && !options.ignore_missing) {
    throw ValidationError("detections reference unknown image id(s): " + join_ids(missing));
  }

  std::unordered_map<std::string, const DetectionSet*> by_image;
  for (const auto& set : detection_sets) {
    validate_detection_set(set, manifest.class_names.size());
    if (!by_image.emplace(set.image_id, &set).second) {
      throw ValidationError("duplicate detection set for image '" + set.image_id + "'");
    }
  }

  // Evaluate images in id order so that pooled results never depend on the
  // manifest order or on thread scheduling.
  std::vector<const ImageRecord*> images;
  images.reserve(manifest.images.size());
  for (const auto& image : manifest.images) {
    images.push_back(&image);
  }
  std::sort(images.begin(), images.end(),
            [](const ImageRecord* a, const ImageRecord* b) { return a->image_id < b->image_id; });

  const std::size_t n_classes = manifest.class_names.size();
  const std::size_t n_thresholds = config.iou_thresholds.size();
  const std::vector<Detection> no_detections;

  // matches[image][threshold * n_classes + class]
  std::vector<std::vector<MatchResult>> matches(images.size());
  parallel_for(images.size(), options.threads, [&](std::size_t i) {
    const ImageRecord& image = *images[i];
    auto it = by_image.find(image.image_id);
    std::span<const Detection> dets =
        it == by_image.end() ? std::span<const Detection>(no_detections)
                             : std::span<const Detection>(it->second->detections);
    auto& slot = matches[i];
    slot.reserve(n_thresholds * n_classes);
    for (double threshold : config.iou_thresholds) {
      for (ClassId c = 0; c < n_classes; ++c) {
        slot.push_back(match_detections(image.objects, dets, threshold, c));
      }
    }
  });

  std::vector<MapResult> results;
  for (std::size_t t = 0; t < n_thresholds; ++t) {
    MapResult map;
    map.iou_threshold = config.iou_thresholds[t];
    double ap_sum = 0.0;
    std::size_t ap_count = 0;
    for (ClassId c = 0; c < n_classes; ++c) {
      std::vector<ImageMatches> per_image;
      per_image.reserve(images.size());
      ApResult ap;
      ap.class_id = c;
      ap.iou_threshold = map.iou_threshold;
      for (std::size_t i = 0; i < images.size(); ++i) {
        const MatchResult& m = matches[i][t * n_classes + c];
        ap.n_gt += m.ground_truth_count;
        ap.n_det += m.detections.size();
        ap.n_tp += m.true_positives();
        per_image.push_back({images[i]->image_id, m});
      }
      ap.n_fp = ap.n_det - ap.n_tp;
      auto ranked = pool_matches(per_image);
      ap.curve = precision_recall_curve(ranked, ap.n_gt);
      ap.ap = average_precision(ap.curve, config.interpolation);
      if (ap.ap) {
        ap_sum += *ap.ap;
        ++ap_count;
      }
      map.per_class.push_back(std::move(ap));
    }
    if (ap_count > 0) {
      map.map = ap_sum / static_cast<double>(ap_count);
    }
    results.push_back(std::move(map));
  }
  return results;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

std::string map_report_csv(const std::vector<MapResult>& results,
                           const std::vector<std::string>& class_names) {
  std::string out = "class,iou_threshold,ap,n_gt,n_det,n_tp,n_fp\n";
  for (const auto& map : results) {
    std::size_t gt = 0, det = 0, tp = 0, fp = 0;
    for (const auto& ap : map.per_class) {
      const std::string name =
          ap.class_id < class_names.size() ? class_names[ap.class_id] : std::to_string(ap.class_id);
      out += name + ',' + format_canonical(map.iou_threshold) + ',' + format_optional(ap.ap, 3) +
             ',' + std::to_string(ap.n_gt) + ',' + std::to_string(ap.n_det) + ',' +
             std::to_string(ap.n_tp) + ',' + std::to_string(ap.n_fp) + '\n';
      gt += ap.n_gt;
      det += ap.n_det;
      tp += ap.n_tp;
      fp += ap.n_fp;
    }
    out += "mAP," + format_canonical(map.iou_threshold) + ',' + format_optional(map.map, 3) + ',' +
           std::to_string(gt) + ',' + std::to_string(det) + ',' + std::to_string(tp) + ',' +
           std::to_string(fp) + '\n';
  }
  return out;
}

std::string pr_curve_csv(const std::vector<MapResult>& results,
                         const std::vector<std::string>& class_names) {
  std::string out = "class,iou_threshold,confidence,recall,precision\n";
  for (const auto& map : results) {
    for (const auto& ap : map.per_class) {
      const std::string name =
          ap.class_id < class_names.size() ? class_names[ap.class_id] : std::to_string(ap.class_id);
      for (const auto& p : ap.curve.points) {
        out += name + ',' + format_canonical(map.iou_threshold) + ',' +
               format_shortest(p.confidence) + ',' + format_canonical(p.recall) + ',' +
               format_canonical(p.precision) + '\n';
      }
    }
  }
  return out;
}

std::string render_map_table(const std::vector<MapColumn>& columns) {
  std::ostringstream out;
  out << "Dataset";
  for (const auto& c : columns) {
    out << '\t' << c.label;
  }
  out << '\n';
  if (columns.empty()) {
    return out.str();
  }
  for (const auto& [threshold, unused] : columns.front().values) {
    out << "mAP @ " << format_canonical(threshold) << " IoU";
    for (const auto& c : columns) {
      auto it = std::find_if(c.values.begin(), c.values.end(),
                             [&](const auto& v) { return v.first == threshold; });
      out << '\t' << (it != c.values.end() && it->second ? format_fixed(*it->second, 3) : "n/a");
    }
    out << '\n';
  }
  return out.str();
}

} // namespace protoeval
