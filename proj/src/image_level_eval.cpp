#include "protoeval/image_level_eval.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <unordered_map>

#include "protoeval/errors.hpp"
#include "protoeval/parallel.hpp"
#include "protoeval/text_format.hpp"

namespace protoeval {

std::string to_string(Outcome outcome) {
  switch (outcome) {
  case Outcome::true_positive:
    return "true_positive";
  case Outcome::false_positive:
    return "false_positive";
  case Outcome::true_negative:
    return "true_negative";
  case Outcome::false_negative:
    return "false_negative";
  }
  return "true_negative";
}

ImagePolicy parse_policy(const std::string& text) {
  if (text == "existence") {
    return ImagePolicy::existence();
  }
  constexpr std::string_view prefix = "localized:";
  if (text.starts_with(prefix)) {
    auto value = parse_double(std::string_view(text).substr(prefix.size()));
    if (!value || !(*value > 0.0 && *value <= 1.0)) {
      throw ValidationError("localized policy needs an IoU in (0, 1], got '" + text + "'");
    }
    return ImagePolicy::localized(*value);
  }
  throw ValidationError("unknown policy '" + text + "' (expected existence or localized:<iou>)");
}

std::string to_string(const ImagePolicy& policy) {
  if (policy.kind == ImagePolicy::Kind::existence) {
    return "existence";
  }
  return "localized:" + format_canonical(policy.min_iou);
}

ImageOutcome classify_image(const ImageRecord& record, const DetectionSet& detections,
                            const EvalConfig& config, const ImagePolicy& policy,
                            ClassId class_id) {
  if (record.image_id != detections.image_id) {
    throw ValidationError("detections for '" + detections.image_id +
                          "' passed with image '" + record.image_id + "'");
  }
  ImageOutcome result;
  result.image_id = record.image_id;
  result.class_id = class_id;

  std::vector<const BoundingBox*> truths;
  for (const auto& o : record.objects) {
    if (o.class_id == class_id) {
      truths.push_back(&o.box);
    }
  }

  bool fired = false;
  for (const auto& d : detections.detections) {
    if (d.class_id != class_id) {
      continue;
    }
    result.best_confidence = std::max(result.best_confidence.value_or(d.confidence), d.confidence);
    if (!(d.confidence > config.confidence_threshold)) {
      continue;
    }
    double best = -1.0;
    for (const BoundingBox* t : truths) {
      best = std::max(best, iou(d.box, *t));
    }
    if (best >= 0.0) {
      result.best_iou = std::max(result.best_iou.value_or(best), best);
    }
    if (policy.kind == ImagePolicy::Kind::existence || best >= policy.min_iou) {
      fired = true;
    }
  }

  const bool present = !truths.empty();
  if (fired) {
    result.outcome = present ? Outcome::true_positive : Outcome::false_positive;
  } else {
    result.outcome = present ? Outcome::false_negative : Outcome::true_negative;
  }
  return result;
}

ConfusionCounts aggregate(std::span<const ImageOutcome> outcomes) {
  ConfusionCounts counts;
  std::set<std::pair<std::string, ClassId>> seen;
  for (const auto& o : outcomes) {
    if (!seen.emplace(o.image_id, o.class_id).second) {
      throw ValidationError("duplicate outcome for image '" + o.image_id + "'");
    }
    switch (o.outcome) {
    case Outcome::true_positive:
      ++counts.tp;
      break;
    case Outcome::false_positive:
      ++counts.fp;
      break;
    case Outcome::true_negative:
      ++counts.tn;
      break;
    case Outcome::false_negative:
      ++counts.fn;
      break;
    }
  }
  return counts;
}

namespace {

std::optional<double> ratio(std::int64_t num, std::int64_t den) {
  if (den == 0) {
    return std::nullopt;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

} // namespace

ImageLevelMetrics metrics(const ConfusionCounts& c) {
  return {ratio(c.tp, c.tp + c.fp), ratio(c.tp, c.tp + c.fn), ratio(c.tp + c.tn, c.total())};
}

std::vector<ImageOutcome> evaluate_images(const DatasetManifest& manifest,
                                          std::span<const DetectionSet> detection_sets,
                                          const EvalConfig& config, const ImagePolicy& policy,
                                          const EvalOptions& options) {
  if (auto missing = unresolved_image_ids(manifest, detection_sets);
      !missing.empty() && !options.ignore_missing) {
    std::string ids;
    for (const auto& id : missing) {
      ids += (ids.empty() ? "" : ", ") + id;
    }
    throw ValidationError("detections reference unknown image id(s): " + ids);
  }
  std::unordered_map<std::string, const DetectionSet*> by_image;
  for (const auto& set : detection_sets) {
    validate_detection_set(set, manifest.class_names.size());
    if (!by_image.emplace(set.image_id, &set).second) {
      throw ValidationError("duplicate detection set for image '" + set.image_id + "'");
    }
  }

  std::vector<const ImageRecord*> images;
  for (const auto& image : manifest.images) {
    images.push_back(&image);
  }
  std::sort(images.begin(), images.end(),
            [](const ImageRecord* a, const ImageRecord* b) { return a->image_id < b->image_id; });

  const std::size_t n_classes = manifest.class_names.size();
  std::vector<ImageOutcome> outcomes(images.size() * n_classes);
  parallel_for(images.size(), options.threads, [&](std::size_t i) {
    const ImageRecord& image = *images[i];
    DetectionSet empty{image.image_id, {}};
    auto it = by_image.find(image.image_id);
    const DetectionSet& dets = it == by_image.end() ? empty : *it->second;
    for (ClassId c = 0; c < n_classes; ++c) {
      outcomes[c * images.size() + i] = classify_image(image, dets, config, policy, c);
    }
  });
  return outcomes;
}

std::string per_image_csv(std::span<const ImageOutcome> outcomes,
                          const std::vector<std::string>& class_names) {
  std::string out = "image_id,class,outcome,best_confidence,best_iou\n";
  for (const auto& o : outcomes) {
    const std::string name =
        o.class_id < class_names.size() ? class_names[o.class_id] : std::to_string(o.class_id);
    out += o.image_id + ',' + name + ',' + to_string(o.outcome) + ',' +
           (o.best_confidence ? format_shortest(*o.best_confidence) : "") + ',' +
           (o.best_iou ? format_canonical(*o.best_iou) : "") + '\n';
  }
  return out;
}

std::string confusion_summary_csv(std::span<const ConfusionRow> rows) {
  std::string out = "class,tp,fp,tn,fn,precision,recall,accuracy\n";
  for (const auto& row : rows) {
    const auto m = metrics(row.counts);
    out += row.label + ',' + std::to_string(row.counts.tp) + ',' + std::to_string(row.counts.fp) +
           ',' + std::to_string(row.counts.tn) + ',' + std::to_string(row.counts.fn) + ',' +
           format_optional(m.precision, 3) + ',' + format_optional(m.recall, 3) + ',' +
           format_optional(m.accuracy, 3) + '\n';
  }
  return out;
}

std::string render_confusion_table(std::span<const ConfusionRow> rows) {
  std::ostringstream out;
  out << "\tTrue Positives\tFalse Positives\tTrue Negatives\tFalse Negatives\tPrecision\tRecall"
         "\tAccuracy\n";
  auto cell = [](std::optional<double> v) { return v ? format_fixed(*v, 3) : std::string("n/a"); };
  for (const auto& row : rows) {
    const auto m = metrics(row.counts);
    out << row.label << '\t' << row.counts.tp << '\t' << row.counts.fp << '\t' << row.counts.tn
        << '\t' << row.counts.fn << '\t' << cell(m.precision) << '\t' << cell(m.recall) << '\t'
        << cell(m.accuracy) << '\n';
  }
  return out.str();
}

} // namespace protoeval
