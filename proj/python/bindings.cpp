#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "protoeval/annotation_io.hpp"
#include "protoeval/cli.hpp"
#include "protoeval/dataset_manager.hpp"
#include "protoeval/errors.hpp"
#include "protoeval/image_level_eval.hpp"
#include "protoeval/match_metrics.hpp"
#include "protoeval/training_ledger.hpp"

#include <sstream>

namespace py = pybind11;
using namespace protoeval;

namespace {

py::tuple box_tuple(const BoundingBox& b) { return py::make_tuple(b.x_min, b.y_min, b.x_max, b.y_max); }

BoundingBox to_box(const std::array<double, 4>& b) { return {b[0], b[1], b[2], b[3]}; }

py::dict counts_dict(const SplitCounts& c) {
  py::dict d;
  d["images"] = c.images;
  d["objects"] = c.objects;
  d["positives"] = c.positives;
  d["negatives"] = c.negatives;
  return d;
}

EvalConfig make_config(const std::vector<double>& thresholds, double confidence,
                       const std::string& interpolation) {
  EvalConfig config;
  config.iou_thresholds = thresholds;
  config.confidence_threshold = confidence;
  config.interpolation = interpolation_from_string(interpolation);
  validate_config(config);
  return config;
}

} // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Evaluation core for prototype object detection datasets";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<UndefinedValueError>(m, "UndefinedValueError", PyExc_ArithmeticError);

  m.def("iou", [](const std::array<double, 4>& a, const std::array<double, 4>& b) {
    return iou(to_box(a), to_box(b));
  }, py::arg("a"), py::arg("b"), "IoU of two (x_min, y_min, x_max, y_max) boxes.");

  m.def("canonicalize_manifest", [](const std::string& text) {
    return serialize_manifest(parse_manifest(text));
  }, py::arg("text"), "Parse and re-serialize a manifest.");

  m.def("manifest_summary", [](const std::string& text) {
    const auto manifest = parse_manifest(text);
    py::list images;
    for (const auto& r : manifest.images) {
      py::list objects;
      for (const auto& o : r.objects) {
        objects.append(py::make_tuple(o.class_id, box_tuple(o.box)));
      }
      py::dict image;
      image["image_id"] = r.image_id;
      image["source"] = to_string(r.source);
      image["is_negative"] = r.is_negative;
      image["objects"] = objects;
      images.append(image);
    }
    py::dict out;
    out["class_names"] = manifest.class_names;
    out["images"] = images;
    return out;
  }, py::arg("text"));

  m.def("normalized_to_manifest", [](const std::string& image_id, const std::string& labels,
                                     double width, double height,
                                     const std::vector<std::string>& class_names) {
    DatasetManifest manifest;
    manifest.class_names = class_names;
    ImageRecord record;
    record.image_id = image_id;
    record.objects = parse_normalized_labels(labels, width, height, class_names);
    record.is_negative = record.objects.empty();
    manifest.images.push_back(std::move(record));
    return serialize_manifest(manifest);
  }, py::arg("image_id"), py::arg("labels"), py::arg("width"), py::arg("height"),
     py::arg("class_names"), "Single-image manifest from a normalized label file.");

  m.def("evaluate", [](const std::string& manifest_text, const std::string& detections_text,
                       const std::vector<double>& thresholds, double confidence,
                       const std::string& interpolation, std::size_t threads) {
    const auto manifest = parse_manifest(manifest_text);
    const auto detections = parse_detections(detections_text);
    EvalOptions options;
    options.threads = threads;
    const auto results = mean_average_precision(
        manifest, detections, make_config(thresholds, confidence, interpolation), options);
    py::list out;
    for (const auto& r : results) {
      py::list per_class;
      for (const auto& ap : r.per_class) {
        py::dict row;
        row["class"] = manifest.class_names.at(ap.class_id);
        row["ap"] = ap.ap;
        row["n_gt"] = ap.n_gt;
        row["n_det"] = ap.n_det;
        row["n_tp"] = ap.n_tp;
        row["n_fp"] = ap.n_fp;
        per_class.append(row);
      }
      py::dict item;
      item["iou_threshold"] = r.iou_threshold;
      item["map"] = r.map;
      item["per_class"] = per_class;
      out.append(item);
    }
    return out;
  }, py::arg("manifest"), py::arg("detections"), py::arg("iou_thresholds") = std::vector<double>{0.5, 0.75},
     py::arg("confidence_threshold") = 0.5, py::arg("interpolation") = "all",
     py::arg("threads") = 1, "mAP per IoU threshold from manifest and detections JSON text.");

  m.def("image_metrics", [](std::int64_t tp, std::int64_t fp, std::int64_t tn, std::int64_t fn) {
    const auto mm = metrics({tp, fp, tn, fn});
    py::dict d;
    d["precision"] = mm.precision;
    d["recall"] = mm.recall;
    d["accuracy"] = mm.accuracy;
    return d;
  }, py::arg("tp"), py::arg("fp"), py::arg("tn"), py::arg("fn"));

  m.def("image_outcomes", [](const std::string& manifest_text, const std::string& detections_text,
                             double confidence, const std::string& policy) {
    const auto manifest = parse_manifest(manifest_text);
    const auto detections = parse_detections(detections_text);
    EvalConfig config;
    config.confidence_threshold = confidence;
    const auto outcomes = evaluate_images(manifest, detections, config, parse_policy(policy));
    const auto c = aggregate(outcomes);
    py::dict d;
    d["tp"] = c.tp;
    d["fp"] = c.fp;
    d["tn"] = c.tn;
    d["fn"] = c.fn;
    return d;
  }, py::arg("manifest"), py::arg("detections"), py::arg("confidence_threshold") = 0.5,
     py::arg("policy") = "existence");

  m.def("split_sizes", &split_sizes, py::arg("n"), py::arg("ratios"));

  m.def("generate_split", [](const std::string& manifest_text, const std::array<double, 3>& ratios,
                             std::uint64_t seed, bool stratify, bool group_by_capture) {
    SplitOptions options{ratios, seed, stratify, group_by_capture};
    std::map<std::string, std::string> out;
    for (const auto& [id, split] : generate_split(parse_manifest(manifest_text), options)) {
      out.emplace(id, to_string(split));
    }
    return out;
  }, py::arg("manifest"), py::arg("ratios"), py::arg("seed") = 0, py::arg("stratify") = false,
     py::arg("group_by_capture") = false);

  m.def("accounting", [](const std::string& manifest_text, const std::map<std::string, std::string>& split) {
    SplitAssignment assignment;
    for (const auto& [id, name] : split) {
      assignment.emplace(id, split_from_string(name));
    }
    const auto acc = compute_accounting(parse_manifest(manifest_text), assignment);
    py::dict d;
    for (Split s : kAllSplits) {
      d[py::str(to_string(s))] = counts_dict(acc[s]);
    }
    d["total"] = counts_dict(acc.total);
    return d;
  }, py::arg("manifest"), py::arg("split"));

  m.def("steps_per_epoch", &steps_per_epoch, py::arg("n_images"), py::arg("batch_size"));
  m.def("epochs_from_steps", &epochs_from_steps, py::arg("steps"), py::arg("steps_per_epoch"));
  m.def("steps_from_epochs", &steps_from_epochs, py::arg("epochs"), py::arg("steps_per_epoch"));

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::vector<std::string> argv{"proto_eval"};
    argv.insert(argv.end(), args.begin(), args.end());
    std::ostringstream out, err;
    int code;
    {
      py::gil_scoped_release release;
      code = run_cli(argv, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  }, py::arg("args"), "Run a proto_eval subcommand; returns (exit_code, stdout, stderr).");
}
