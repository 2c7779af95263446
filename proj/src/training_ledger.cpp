#include "protoeval/training_ledger.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "protoeval/errors.hpp"
#include "protoeval/text_format.hpp"

namespace protoeval {

using nlohmann::ordered_json;

std::uint64_t steps_per_epoch(std::uint64_t n_images, std::uint64_t batch_size) {
  if (n_images == 0 || batch_size == 0) {
    throw ValidationError("steps_per_epoch needs a positive image count and batch size");
  }
  return n_images / batch_size + (n_images % batch_size != 0 ? 1 : 0);
}

std::uint64_t epochs_from_steps(std::uint64_t steps, std::uint64_t steps_per_epoch) {
  if (steps_per_epoch == 0) {
    throw ValidationError("steps_per_epoch must be positive");
  }
  return steps / steps_per_epoch;
}

std::uint64_t steps_from_epochs(std::uint64_t epochs, std::uint64_t steps_per_epoch) {
  if (steps_per_epoch != 0 && epochs > std::numeric_limits<std::uint64_t>::max() / steps_per_epoch) {
    throw std::overflow_error("epochs * steps_per_epoch overflows 64 bits");
  }
  return epochs * steps_per_epoch;
}

void validate_training_record(const TrainingRecord& record) {
  const auto& c = record.config;
  const std::string who = "model '" + c.model_label + "'";
  if (c.model_label.empty()) {
    throw ValidationError("model_label must not be empty");
  }
  if (c.batch_size < 1) {
    throw ValidationError(who + ": batch_size must be >= 1");
  }
  if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) {
    throw ValidationError(who + ": learning_rate must be positive");
  }
  if (c.subdivisions) {
    if (*c.subdivisions == 0 || c.batch_size % *c.subdivisions != 0) {
      throw ValidationError(who + ": subdivisions must divide batch_size");
    }
  }
  if (c.max_steps && *c.max_steps == 0) {
    throw ValidationError(who + ": max_steps must be positive");
  }
  if (c.n_training_images < 1) {
    throw ValidationError(who + ": n_training_images must be >= 1");
  }
  if (!(c.confidence_threshold >= 0.0 && c.confidence_threshold <= 1.0)) {
    throw ValidationError(who + ": confidence_threshold outside [0, 1]");
  }
  if (record.run) {
    const auto& r = *record.run;
    if (!r.steps_trained && !r.epochs_trained) {
      throw ValidationError(who + ": run needs steps_trained or epochs_trained");
    }
    if (r.steps_trained && r.epochs_trained) {
      const auto spe = steps_per_epoch(c.n_training_images, c.batch_size);
      if (epochs_from_steps(*r.steps_trained, spe) != *r.epochs_trained &&
          steps_from_epochs(*r.epochs_trained, spe) != *r.steps_trained) {
        throw ValidationError(who + ": steps_trained and epochs_trained disagree at " +
                              std::to_string(spe) + " steps per epoch");
      }
    }
    if (r.wall_hours && !(*r.wall_hours >= 0.0)) {
      throw ValidationError(who + ": wall_hours must be non-negative");
    }
  }
}

namespace {

template <typename Json>
const Json* find(const Json& object, const char* key) {
  auto it = object.find(key);
  return it == object.end() || it->is_null() ? nullptr : &*it;
}

template <typename Json>
std::string string_field(const Json& object, const char* key, bool required) {
  const Json* v = find(object, key);
  if (!v) {
    if (required) {
      throw ParseError("missing required field", std::nullopt, key);
    }
    return {};
  }
  if (!v->is_string()) {
    throw ParseError("expected a string", std::nullopt, key);
  }
  return v->template get<std::string>();
}

template <typename Json>
std::optional<double> number_field(const Json& object, const char* key) {
  const Json* v = find(object, key);
  if (!v) {
    return std::nullopt;
  }
  if (!v->is_number()) {
    throw ParseError("expected a number", std::nullopt, key);
  }
  return v->template get<double>();
}

template <typename Json>
std::optional<std::uint64_t> count_field(const Json& object, const char* key) {
  const Json* v = find(object, key);
  if (!v) {
    return std::nullopt;
  }
  if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() &&
                                  v->template get<long long>() < 0)) {
    throw ParseError("expected a non-negative integer", std::nullopt, key);
  }
  return v->template get<std::uint64_t>();
}

template <typename T>
T required(std::optional<T> value, const char* key) {
  if (!value) {
    throw ParseError("missing required field", std::nullopt, key);
  }
  return *value;
}

} // namespace

TrainingRecord parse_training_record(std::string_view text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text.begin(), text.end());
  } catch (const ordered_json::parse_error& e) {
    throw ParseError(e.what());
  }
  if (!doc.is_object()) {
    throw ParseError("expected an object", std::nullopt, "$");
  }

  TrainingRecord record;
  auto& c = record.config;
  c.model_label = string_field(doc, "model_label", true);
  c.framework_label = string_field(doc, "framework_label", false);
  c.learning_rate = required(number_field(doc, "learning_rate"), "learning_rate");
  c.batch_size = required(count_field(doc, "batch_size"), "batch_size");
  c.subdivisions = count_field(doc, "subdivisions");
  c.max_steps = count_field(doc, "max_steps");
  c.resolution_policy = string_field(doc, "resolution_policy", false);
  c.confidence_threshold = number_field(doc, "confidence_threshold").value_or(0.5);
  c.n_training_images = required(count_field(doc, "n_training_images"), "n_training_images");

  if (const auto* run = find(doc, "run")) {
    if (!run->is_object()) {
      throw ParseError("expected an object", std::nullopt, "run");
    }
    RunSummary r;
    r.steps_trained = count_field(*run, "steps_trained");
    r.epochs_trained = count_field(*run, "epochs_trained");
    r.wall_hours = number_field(*run, "wall_hours");
    r.final_avg_loss = number_field(*run, "final_avg_loss");
    record.run = r;
  }
  validate_training_record(record);
  return record;
}

std::string serialize_training_record(const TrainingRecord& record) {
  validate_training_record(record);
  const auto& c = record.config;
  ordered_json doc;
  doc["model_label"] = c.model_label;
  doc["framework_label"] = c.framework_label;
  doc["learning_rate"] = c.learning_rate;
  doc["batch_size"] = c.batch_size;
  if (c.subdivisions) {
    doc["subdivisions"] = *c.subdivisions;
  }
  if (c.max_steps) {
    doc["max_steps"] = *c.max_steps;
  }
  doc["resolution_policy"] = c.resolution_policy;
  doc["confidence_threshold"] = c.confidence_threshold;
  doc["n_training_images"] = c.n_training_images;
  if (record.run) {
    ordered_json run = ordered_json::object();
    if (record.run->steps_trained) {
      run["steps_trained"] = *record.run->steps_trained;
    }
    if (record.run->epochs_trained) {
      run["epochs_trained"] = *record.run->epochs_trained;
    }
    if (record.run->wall_hours) {
      run["wall_hours"] = *record.run->wall_hours;
    }
    if (record.run->final_avg_loss) {
      run["final_avg_loss"] = *record.run->final_avg_loss;
    }
    doc["run"] = std::move(run);
  }
  return doc.dump(2) + "\n";
}

LedgerRow ledger_row(const TrainingRecord& record) {
  validate_training_record(record);
  const auto& c = record.config;
  LedgerRow row;
  row.model = c.model_label;
  row.steps_per_epoch = steps_per_epoch(c.n_training_images, c.batch_size);
  if (record.run) {
    const auto& r = *record.run;
    row.steps = r.steps_trained;
    row.epochs = r.epochs_trained;
    row.wall_hours = r.wall_hours;
    row.final_avg_loss = r.final_avg_loss;
  } else if (c.max_steps) {
    row.steps = c.max_steps;
  }
  if (row.steps && !row.epochs) {
    row.epochs = epochs_from_steps(*row.steps, row.steps_per_epoch);
  } else if (row.epochs && !row.steps) {
    row.steps = steps_from_epochs(*row.epochs, row.steps_per_epoch);
  }
  return row;
}

std::string ledger_csv(std::span<const LedgerRow> rows) {
  std::string out = "model,steps,epochs,steps_per_epoch,wall_hours,final_avg_loss\n";
  auto count = [](std::optional<std::uint64_t> v) { return v ? std::to_string(*v) : ""; };
  auto real = [](std::optional<double> v) { return v ? format_canonical(*v) : ""; };
  for (const auto& r : rows) {
    out += r.model + ',' + count(r.steps) + ',' + count(r.epochs) + ',' +
           std::to_string(r.steps_per_epoch) + ',' + real(r.wall_hours) + ',' +
           real(r.final_avg_loss) + '\n';
  }
  return out;
}

} // namespace protoeval
