#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace protoeval {

struct TrainingConfig {
  std::string model_label;
  std::string framework_label;
  double learning_rate = 0.001;
  std::uint64_t batch_size = 1;
  std::optional<std::uint64_t> subdivisions;
  std::optional<std::uint64_t> max_steps;
  std::string resolution_policy;
  double confidence_threshold = 0.5;
  std::uint64_t n_training_images = 1;
};

/// What a finished run reported. Give steps or epochs (or both, if they agree).
struct RunSummary {
  std::optional<std::uint64_t> steps_trained;
  std::optional<std::uint64_t> epochs_trained;
  std::optional<double> wall_hours;
  std::optional<double> final_avg_loss;
};

struct TrainingRecord {
  TrainingConfig config;
  std::optional<RunSummary> run;
};

/// ceil(n_images / batch_size). A trailing partial batch is one more step.
std::uint64_t steps_per_epoch(std::uint64_t n_images, std::uint64_t batch_size);

/// floor(steps / steps_per_epoch): whole epochs completed.
std::uint64_t epochs_from_steps(std::uint64_t steps, std::uint64_t steps_per_epoch);

/// epochs * steps_per_epoch; throws std::overflow_error past 64 bits.
std::uint64_t steps_from_epochs(std::uint64_t epochs, std::uint64_t steps_per_epoch);

void validate_training_record(const TrainingRecord& record);

/// JSON document with the TrainingConfig fields at top level and an optional
/// "run" object holding the RunSummary fields.
TrainingRecord parse_training_record(std::string_view text);
std::string serialize_training_record(const TrainingRecord& record);

struct LedgerRow {
  std::string model;
  std::uint64_t steps_per_epoch = 0;
  std::optional<std::uint64_t> steps;
  std::optional<std::uint64_t> epochs;
  std::optional<double> wall_hours;
  std::optional<double> final_avg_loss;
};

/// Fills in whichever of steps/epochs the run did not report. Without a run,
/// the planned max_steps (if any) is used.
LedgerRow ledger_row(const TrainingRecord& record);

/// model,steps,epochs,steps_per_epoch,wall_hours,final_avg_loss
std::string ledger_csv(std::span<const LedgerRow> rows);

} // namespace protoeval
