#include "protoeval/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <set>
#include <thread>

#include <CLI11.hpp>

#include "protoeval/annotation_io.hpp"
#include "protoeval/dataset_manager.hpp"
#include "protoeval/errors.hpp"
#include "protoeval/image_level_eval.hpp"
#include "protoeval/match_metrics.hpp"
#include "protoeval/text_format.hpp"
#include "protoeval/training_ledger.hpp"

namespace protoeval {

namespace fs = std::filesystem;

std::size_t thread_budget() {
  std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PROTO_EVAL_THREADS")) {
    if (auto n = parse_integer(env); n && *n >= 1) {
      return std::min(hw, static_cast<std::size_t>(*n));
    }
  }
  return hw;
}

namespace {

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot read " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << content) || !out.flush()) {
    throw IoError("cannot write " + path.string());
  }
}

std::vector<fs::path> files_with_extension(const fs::path& input, const std::string& ext) {
  if (!fs::exists(input)) {
    throw IoError("no such file or directory: " + input.string());
  }
  if (!fs::is_directory(input)) {
    return {input};
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(input)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

DatasetManifest load_manifest(const std::string& path) { return parse_manifest(read_file(path)); }

std::vector<double> parse_threshold_list(const std::string& text) {
  std::vector<double> values;
  for (const auto& field : split_fields(text, ',')) {
    auto v = parse_double(field);
    if (!v) {
      throw UsageError("bad IoU threshold '" + field + "'");
    }
    values.push_back(*v);
  }
  return values;
}

// Restricts the manifest to one split and drops detections that belong to
// images outside it. Detections for unknown images are kept so they still
// surface as unresolved.
void restrict_to_subset(DatasetManifest& manifest, std::vector<DetectionSet>& detections,
                        const std::string& split_path, const std::string& subset) {
  if (split_path.empty() && subset.empty()) {
    return;
  }
  if (split_path.empty() || subset.empty()) {
    throw UsageError("--split and --subset must be given together");
  }
  Split wanted;
  try {
    wanted = split_from_string(subset);
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
  const auto split = parse_split_file(read_file(split_path));
  std::set<std::string> all_ids;
  for (const auto& image : manifest.images) {
    all_ids.insert(image.image_id);
  }
  std::erase_if(manifest.images, [&](const ImageRecord& r) {
    auto it = split.find(r.image_id);
    return it == split.end() || it->second != wanted;
  });
  std::set<std::string> kept;
  for (const auto& image : manifest.images) {
    kept.insert(image.image_id);
  }
  std::erase_if(detections, [&](const DetectionSet& d) {
    return all_ids.contains(d.image_id) && !kept.contains(d.image_id);
  });
}

struct ConvertArgs {
  std::string input;
  std::string format = "xml";
  std::string output;
  std::string classes;
  std::string image_size = "1920x1080";
  std::string source = "capture_system";
  bool partial = false;
};

int cmd_convert(const ConvertArgs& a, std::ostream& out, std::ostream& err) {
  const ImageSource source = image_source_from_string(a.source);
  std::vector<std::string> class_names;
  if (!a.classes.empty()) {
    class_names = parse_class_names(read_file(a.classes));
  }

  DatasetManifest manifest;
  std::size_t failures = 0;
  auto report = [&](const fs::path& file, const std::string& message) {
    err << "error: " << file.string() << ": " << message << '\n';
    ++failures;
  };

  std::vector<fs::path> files;
  if (a.format == "xml") {
    files = files_with_extension(a.input, ".xml");
    ClassIndex index(class_names, !class_names.empty());
    for (const auto& file : files) {
      try {
        manifest.images.push_back(
            parse_rect_label_xml(read_file(file), index, file.stem().string(), source));
      } catch (const std::exception& e) {
        report(file, e.what());
      }
    }
    manifest.class_names = index.names();
  } else if (a.format == "normalized") {
    if (class_names.empty()) {
      throw UsageError("--classes is required for the normalized format");
    }
    auto size = split_fields(a.image_size, 'x');
    auto width = size.size() == 2 ? parse_integer(size[0]) : std::nullopt;
    auto height = size.size() == 2 ? parse_integer(size[1]) : std::nullopt;
    if (!width || !height || *width <= 0 || *height <= 0) {
      throw UsageError("--image-size must look like 1920x1080");
    }
    files = files_with_extension(a.input, ".txt");
    std::error_code ec;
    std::erase_if(files, [&](const fs::path& f) { return fs::equivalent(f, a.classes, ec); });
    for (const auto& file : files) {
      try {
        std::vector<std::string> warnings;
        ImageRecord record;
        record.image_id = file.stem().string();
        record.source = source;
        record.objects =
            parse_normalized_labels(read_file(file), static_cast<int>(*width),
                                    static_cast<int>(*height), class_names, &warnings);
        record.is_negative = record.objects.empty();
        for (const auto& w : warnings) {
          err << "warning: " << file.string() << ": " << w << '\n';
        }
        manifest.images.push_back(std::move(record));
      } catch (const std::exception& e) {
        report(file, e.what());
      }
    }
    manifest.class_names = class_names;
  } else {
    throw UsageError("unknown --format '" + a.format + "' (expected xml or normalized)");
  }

  if (files.empty()) {
    err << "warning: no annotation files found in " << a.input << '\n';
  }
  if (failures > 0 && !a.partial) {
    err << "error: " << failures << " file(s) failed; nothing written (use --partial)\n";
    return kExitFailure;
  }

  validate_manifest(manifest);
  write_file(a.output, serialize_manifest(manifest));

  std::size_t objects = 0;
  std::size_t negatives = 0;
  for (const auto& image : manifest.images) {
    objects += image.objects.size();
    negatives += image.is_negative ? 1 : 0;
  }
  out << "wrote " << manifest.images.size() << " images (" << negatives << " negative), "
      << objects << " objects, " << manifest.class_names.size() << " classes to " << a.output
      << '\n';
  return failures > 0 ? kExitFailure : kExitOk;
}

struct SplitArgs {
  std::string manifest;
  std::vector<double> ratios;
  std::uint64_t seed = 0;
  bool stratify = false;
  bool group_by_capture = false;
  std::string output;
  std::string accounting;
};

int cmd_split(const SplitArgs& a, std::ostream& out, std::ostream&) {
  if (a.ratios.size() != 3) {
    throw UsageError("--ratios takes exactly three values");
  }
  double sum = 0.0;
  for (double r : a.ratios) {
    if (!(r >= 0.0) || !std::isfinite(r)) {
      throw UsageError("--ratios must be non-negative");
    }
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw UsageError("--ratios must sum to 1 (got " + format_shortest(sum) + ")");
  }
  const auto manifest = load_manifest(a.manifest);
  SplitOptions options;
  std::copy(a.ratios.begin(), a.ratios.end(), options.ratios.begin());
  options.seed = a.seed;
  options.stratify = a.stratify;
  options.group_by_capture = a.group_by_capture;
  const auto split = generate_split(manifest, options);
  write_file(a.output, serialize_split_file(split));

  const auto accounting = compute_accounting(manifest, split);
  if (!a.accounting.empty()) {
    write_file(a.accounting, accounting_csv(accounting));
  }
  out << render_accounting_tables(accounting);
  return kExitOk;
}

struct AccountArgs {
  std::string manifest;
  std::string split;
  std::string expected;
  std::string output;
  std::string fail_on = "warning";
};

int cmd_account(const AccountArgs& a, std::ostream& out, std::ostream& err) {
  Severity threshold;
  if (a.fail_on == "warning") {
    threshold = Severity::warning;
  } else if (a.fail_on == "error") {
    threshold = Severity::error;
  } else {
    throw UsageError("--fail-on must be warning or error");
  }
  const auto manifest = load_manifest(a.manifest);
  const auto split = parse_split_file(read_file(a.split));
  const auto accounting = compute_accounting(manifest, split);
  if (!a.output.empty()) {
    write_file(a.output, accounting_csv(accounting));
  }
  out << render_accounting_tables(accounting);
  if (a.expected.empty()) {
    return kExitOk;
  }

  const auto declared = parse_declared_accounting(read_file(a.expected));
  const auto discrepancies = validate_accounting(accounting, declared);
  bool failing = false;
  for (const auto& d : discrepancies) {
    const bool counts = d.severity >= threshold;
    failing = failing || counts;
    err << (d.severity == Severity::error ? "error" : "warning") << ": " << to_string(d.kind)
        << ": " << d.message << '\n';
  }
  out << discrepancies.size() << " discrepancies\n";
  return failing ? kExitDiscrepancy : kExitOk;
}

struct EvalArgs {
  std::string manifest;
  std::string detections;
  std::string iou_thresholds = "0.5,0.75";
  double confidence_threshold = 0.5;
  std::string interpolation = "all";
  std::string policy = "existence";
  std::string split;
  std::string subset;
  std::string output;
  std::string pr_curve;
  std::string per_image;
  bool ignore_missing = false;
};

struct LoadedEval {
  DatasetManifest manifest;
  std::vector<DetectionSet> detections;
  EvalConfig config;
  EvalOptions options;
};

LoadedEval load_eval_inputs(const EvalArgs& a, std::ostream& err) {
  LoadedEval in;
  try {
    in.config.iou_thresholds = parse_threshold_list(a.iou_thresholds);
    in.config.interpolation = interpolation_from_string(a.interpolation);
    in.config.confidence_threshold = a.confidence_threshold;
    validate_config(in.config);
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
  in.manifest = load_manifest(a.manifest);
  in.detections = parse_detections(read_file(a.detections));
  restrict_to_subset(in.manifest, in.detections, a.split, a.subset);
  in.options.threads = thread_budget();
  in.options.ignore_missing = a.ignore_missing;

  auto missing = unresolved_image_ids(in.manifest, in.detections);
  for (const auto& id : missing) {
    err << (a.ignore_missing ? "warning" : "error") << ": detections for unknown image id '" << id
        << "'\n";
  }
  if (!missing.empty() && !a.ignore_missing) {
    throw ValidationError(std::to_string(missing.size()) +
                          " detection set(s) reference unknown images (use --ignore-missing)");
  }
  return in;
}

int cmd_evaluate(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const auto in = load_eval_inputs(a, err);
  const auto results = mean_average_precision(in.manifest, in.detections, in.config, in.options);
  if (!a.output.empty()) {
    write_file(a.output, map_report_csv(results, in.manifest.class_names));
  }
  if (!a.pr_curve.empty()) {
    write_file(a.pr_curve, pr_curve_csv(results, in.manifest.class_names));
  }
  MapColumn column{a.subset.empty() ? "all images" : a.subset, {}};
  for (const auto& r : results) {
    column.values.emplace_back(r.iou_threshold, r.map);
  }
  out << render_map_table({column});
  for (const auto& r : results) {
    if (!r.map) {
      err << "warning: mAP @ " << format_canonical(r.iou_threshold)
          << " is undefined: no class has ground truth\n";
    }
  }
  return kExitOk;
}

int cmd_image_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  ImagePolicy policy;
  try {
    policy = parse_policy(a.policy);
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
  const auto in = load_eval_inputs(a, err);
  const auto outcomes = evaluate_images(in.manifest, in.detections, in.config, policy, in.options);
  if (!a.per_image.empty()) {
    write_file(a.per_image, per_image_csv(outcomes, in.manifest.class_names));
  }
  std::vector<ConfusionRow> rows;
  const std::size_t n_images = in.manifest.images.size();
  for (ClassId c = 0; c < in.manifest.class_names.size(); ++c) {
    std::span<const ImageOutcome> slice(outcomes.data() + c * n_images, n_images);
    rows.push_back({in.manifest.class_names[c], aggregate(slice)});
  }
  if (!a.output.empty()) {
    write_file(a.output, confusion_summary_csv(rows));
  }
  out << render_confusion_table(rows);
  return kExitOk;
}

struct LedgerArgs {
  std::vector<std::string> configs;
  std::string output;
};

int cmd_ledger(const LedgerArgs& a, std::ostream& out, std::ostream&) {
  std::vector<LedgerRow> rows;
  for (const auto& path : a.configs) {
    try {
      rows.push_back(ledger_row(parse_training_record(read_file(path))));
    } catch (const ParseError& e) {
      throw ParseError(path + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(path + ": " + e.what());
    }
  }
  const std::string csv = ledger_csv(rows);
  if (!a.output.empty()) {
    write_file(a.output, csv);
  }
  out << csv;
  return kExitOk;
}

void add_eval_options(CLI::App* cmd, EvalArgs& a) {
  cmd->add_option("manifest", a.manifest, "Canonical manifest")->required();
  cmd->add_option("detections", a.detections, "Canonical detections file")->required();
  cmd->add_option("--iou-thresholds", a.iou_thresholds, "Comma-separated IoU thresholds")
      ->capture_default_str();
  cmd->add_option("--confidence-threshold", a.confidence_threshold,
                  "Detections must score strictly above this to count per image")
      ->capture_default_str();
  cmd->add_option("--split", a.split, "Split file restricting the evaluated images");
  cmd->add_option("--subset", a.subset, "Split name to evaluate (training|validation|test)");
  cmd->add_option("-o,--out", a.output, "Report CSV");
  cmd->add_flag("--ignore-missing", a.ignore_missing,
                "Skip detections whose image is not in the manifest");
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dataset accounting and detection evaluation for prototype image sets",
               "proto_eval"};
  app.require_subcommand(1);

  ConvertArgs convert;
  auto* c = app.add_subcommand("convert", "Convert label files into a canonical manifest");
  c->add_option("input", convert.input, "Label file or directory")->required();
  c->add_option("--format", convert.format, "xml or normalized")->capture_default_str();
  c->add_option("-o,--out", convert.output, "Manifest to write")->required();
  c->add_option("--classes", convert.classes, "Class-name file, one per line");
  c->add_option("--image-size", convert.image_size, "WxH for normalized labels")
      ->capture_default_str();
  c->add_option("--source", convert.source, "capture_system, web or material_sample")
      ->capture_default_str();
  c->add_flag("--partial", convert.partial, "Write the manifest even if some files fail");

  SplitArgs split;
  auto* s = app.add_subcommand("split", "Generate a training/validation/test split");
  s->add_option("manifest", split.manifest)->required();
  s->add_option("--ratios", split.ratios, "Three fractions summing to 1")->expected(3)->required();
  s->add_option("--seed", split.seed)->capture_default_str();
  s->add_flag("--stratify", split.stratify, "Split positives and negatives separately");
  s->add_flag("--group-by-capture", split.group_by_capture, "Keep the views of a capture together");
  s->add_option("-o,--out", split.output, "Split file to write")->required();
  s->add_option("--accounting", split.accounting, "Accounting CSV to write");

  AccountArgs account;
  auto* ac = app.add_subcommand("account", "Count images, objects and positives per split");
  ac->add_option("manifest", account.manifest)->required();
  ac->add_option("split", account.split)->required();
  ac->add_option("--expected", account.expected, "Declared counts CSV to validate against");
  ac->add_option("-o,--out", account.output, "Accounting CSV to write");
  ac->add_option("--fail-on", account.fail_on, "Lowest severity that fails: warning or error")
      ->capture_default_str();

  EvalArgs evaluate;
  auto* ev = app.add_subcommand("evaluate", "mAP at each IoU threshold");
  add_eval_options(ev, evaluate);
  ev->add_option("--interpolation", evaluate.interpolation, "all or eleven")->capture_default_str();
  ev->add_option("--pr-curve", evaluate.pr_curve, "Precision-recall curve CSV");

  EvalArgs image_eval;
  auto* ie = app.add_subcommand("image-eval", "Per-image TP/FP/TN/FN with precision/recall/accuracy");
  add_eval_options(ie, image_eval);
  ie->add_option("--policy", image_eval.policy, "existence or localized:<iou>")
      ->capture_default_str();
  ie->add_option("--per-image", image_eval.per_image, "Per-image outcome CSV");

  LedgerArgs ledger;
  auto* lg = app.add_subcommand("ledger", "Step/epoch arithmetic for training configs");
  lg->add_option("configs", ledger.configs, "Training config documents");
  lg->add_option("-o,--out", ledger.output, "Ledger CSV to write");

  std::vector<const char*> argv;
  for (const auto& arg : args) {
    argv.push_back(arg.c_str());
  }
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*c) {
      return cmd_convert(convert, out, err);
    }
    if (*s) {
      return cmd_split(split, out, err);
    }
    if (*ac) {
      return cmd_account(account, out, err);
    }
    if (*ev) {
      return cmd_evaluate(evaluate, out, err);
    }
    if (*ie) {
      return cmd_image_eval(image_eval, out, err);
    }
    if (*lg) {
      return cmd_ledger(ledger, out, err);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

} // namespace protoeval
