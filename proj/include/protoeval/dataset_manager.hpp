#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "protoeval/annotation.hpp"

namespace protoeval {

enum class Split { training = 0, validation = 1, test = 2 };

inline constexpr std::array<Split, 3> kAllSplits{Split::training, Split::validation, Split::test};

std::string to_string(Split split);
Split split_from_string(const std::string& text);

/// image_id -> split. Ordered so that serialization is stable.
using SplitAssignment = std::map<std::string, Split>;

/// Tab-separated "image_id<TAB>split_name" lines.
SplitAssignment parse_split_file(std::string_view text);
std::string serialize_split_file(const SplitAssignment& split);

struct SplitCounts {
  std::int64_t images = 0;
  std::int64_t objects = 0;
  std::int64_t positives = 0;
  std::int64_t negatives = 0;
};

/// Percentages are kept as full-precision ratios and rendered on output.
/// Image and object shares are relative to the column total; positive and
/// negative shares are relative to the split's own image count.
struct SplitShare {
  std::optional<double> images;
  std::optional<double> objects;
  std::optional<double> positives;
  std::optional<double> negatives;
};

struct SplitAccounting {
  std::array<SplitCounts, 3> splits{};
  SplitCounts total;

  const SplitCounts& operator[](Split s) const { return splits[static_cast<int>(s)]; }
  SplitShare share(Split s) const;
  SplitShare total_share() const;
};

SplitAccounting compute_accounting(const DatasetManifest& manifest, const SplitAssignment& split);

/// Fraction of images with at least one object. Throws UndefinedValueError
/// on an empty manifest.
double positive_fraction(const DatasetManifest& manifest);

struct SplitOptions {
  std::array<double, 3> ratios{0.8, 0.1, 0.1};
  std::uint64_t seed = 0;
  bool stratify = false;
  /// Keep all views of one capture in the same split.
  bool group_by_capture = false;
};

/// Largest-remainder apportionment of `n` items: floor(ratio * n) each, then
/// one extra to the largest fractional remainders (ties to the earlier split).
std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& ratios);

/// Throws ValidationError for bad ratios or a manifest too small to fill
/// three non-empty splits. Deterministic for a fixed seed and independent of
/// manifest order.
SplitAssignment generate_split(const DatasetManifest& manifest, const SplitOptions& options);

// ---------------------------------------------------------------------------
// Validation against declared (published) numbers
// ---------------------------------------------------------------------------

/// A count with its printed percentage, e.g. "1243 (76.5%)". The number of
/// decimals in the declared percentage sets the comparison precision.
struct DeclaredValue {
  std::optional<std::int64_t> count;
  std::optional<std::string> percent;
};

struct DeclaredRow {
  DeclaredValue images;
  DeclaredValue objects;
  DeclaredValue positives;
  DeclaredValue negatives;
};

struct DeclaredAccounting {
  std::array<std::optional<DeclaredRow>, 3> splits{};
  std::optional<DeclaredRow> total;
};

enum class Severity { warning, error };

struct Discrepancy {
  enum class Kind {
    count_mismatch,      // declared count != observed count
    percent_mismatch,    // declared percentage != observed at the declared precision
    sum_mismatch,        // declared split counts do not add up to the declared total
    partition_mismatch,  // declared positives + negatives != declared images
  };

  Kind kind;
  Severity severity;
  std::string row;    // split name or "total"
  std::string field;  // images | objects | positives | negatives
  std::string expected;
  std::string observed;
  std::int64_t delta = 0; // observed - expected for count-like kinds
  std::string message;
};

std::string to_string(Discrepancy::Kind kind);

std::vector<Discrepancy> validate_accounting(const SplitAccounting& observed,
                                             const DeclaredAccounting& expected);

/// Accounting CSV: split,images,pct_images,objects,pct_objects,positives,
/// pct_positives,negatives,pct_negatives with a final "total" row.
/// Image/object shares use one decimal, positive/negative shares two.
std::string accounting_csv(const SplitAccounting& accounting);

/// Same columns as accounting_csv; blank cells are "not declared".
DeclaredAccounting parse_declared_accounting(std::string_view csv);

/// Human tables in the "count (pct%)" layout of published split summaries.
std::string render_accounting_tables(const SplitAccounting& accounting);

} // namespace protoeval
