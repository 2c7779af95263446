#include "protoeval/dataset_manager.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "protoeval/errors.hpp"
#include "protoeval/text_format.hpp"

namespace protoeval {

std::string to_string(Split split) {
  switch (split) {
  case Split::training:
    return "training";
  case Split::validation:
    return "validation";
  case Split::test:
    return "test";
  }
  return "training";
}

Split split_from_string(const std::string& text) {
  if (text == "training" || text == "train") {
    return Split::training;
  }
  if (text == "validation" || text == "val") {
    return Split::validation;
  }
  if (text == "test") {
    return Split::test;
  }
  throw ValidationError("unknown split name '" + text + "'");
}

SplitAssignment parse_split_file(std::string_view text) {
  SplitAssignment split;
  std::istringstream in{std::string(text)};
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (trim(line).empty()) {
      continue;
    }
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    auto fields = split_fields(line, '\t');
    if (fields.size() != 2 || fields[0].empty()) {
      throw ParseError("expected 'image_id<TAB>split'", line_no);
    }
    Split s;
    try {
      s = split_from_string(std::string(trim(fields[1])));
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no, "split");
    }
    if (!split.emplace(fields[0], s).second) {
      throw ValidationError("line " + std::to_string(line_no) + ": image '" + fields[0] +
                            "' assigned twice");
    }
  }
  return split;
}

std::string serialize_split_file(const SplitAssignment& split) {
  std::string out;
  for (const auto& [id, s] : split) {
    out += id + '\t' + to_string(s) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Accounting
// ---------------------------------------------------------------------------

namespace {

std::optional<double> ratio(std::int64_t part, std::int64_t whole) {
  if (whole == 0) {
    return std::nullopt;
  }
  return static_cast<double>(part) / static_cast<double>(whole);
}

SplitShare share_of(const SplitCounts& c, const SplitCounts& total) {
  return {ratio(c.images, total.images), ratio(c.objects, total.objects),
          ratio(c.positives, c.images), ratio(c.negatives, c.images)};
}

} // namespace

SplitShare SplitAccounting::share(Split s) const { return share_of((*this)[s], total); }

SplitShare SplitAccounting::total_share() const { return share_of(total, total); }

SplitAccounting compute_accounting(const DatasetManifest& manifest, const SplitAssignment& split) {
  SplitAccounting acc;
  std::set<std::string> seen;
  for (const auto& image : manifest.images) {
    auto it = split.find(image.image_id);
    if (it == split.end()) {
      throw ValidationError("image '" + image.image_id + "' is missing from the split");
    }
    seen.insert(image.image_id);
    auto& c = acc.splits[static_cast<int>(it->second)];
    ++c.images;
    c.objects += static_cast<std::int64_t>(image.objects.size());
    if (image.objects.empty()) {
      ++c.negatives;
    } else {
      ++c.positives;
    }
  }
  for (const auto& [id, s] : split) {
    if (!seen.contains(id)) {
      throw ValidationError("split references unknown image '" + id + "'");
    }
  }
  for (const auto& c : acc.splits) {
    acc.total.images += c.images;
    acc.total.objects += c.objects;
    acc.total.positives += c.positives;
    acc.total.negatives += c.negatives;
  }
  return acc;
}

double positive_fraction(const DatasetManifest& manifest) {
  if (manifest.images.empty()) {
    throw UndefinedValueError("positive fraction of an empty manifest");
  }
  auto positives = std::count_if(manifest.images.begin(), manifest.images.end(),
                                 [](const ImageRecord& r) { return !r.objects.empty(); });
  return static_cast<double>(positives) / static_cast<double>(manifest.images.size());
}

// ---------------------------------------------------------------------------
// Split generation
// ---------------------------------------------------------------------------

std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& ratios) {
  // Products within this distance of an integer are treated as exact, so that
  // 0.3 * 10 floors to 3 and equal remainders tie instead of differing by ulps.
  const double eps = 1e-9 * std::max(1.0, static_cast<double>(n));
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> remainders{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    double exact = ratios[i] * static_cast<double>(n);
    double whole = std::floor(exact);
    if (exact - whole > 1.0 - eps) {
      whole += 1.0;
    }
    sizes[i] = static_cast<std::size_t>(whole);
    remainders[i] = std::max(0.0, exact - whole);
    assigned += sizes[i];
  }
  // Largest remainder first; near-equal remainders go to the earlier split.
  std::array<int, 3> order{0, 1, 2};
  for (int a = 0; a < 3; ++a) {
    int best = a;
    for (int b = a + 1; b < 3; ++b) {
      const double lhs = remainders[order[b]];
      const double rhs = remainders[order[best]];
      if (lhs > rhs + eps || (std::abs(lhs - rhs) <= eps && order[b] < order[best])) {
        best = b;
      }
    }
    std::swap(order[a], order[best]);
  }
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) {
    ++sizes[order[k % 3]];
  }
  // Ratios summing slightly above 1 can overshoot by one.
  for (std::size_t k = 0; assigned > n; ++k) {
    int i = order[2 - k % 3];
    if (sizes[i] > 0) {
      --sizes[i];
      --assigned;
    }
  }
  return sizes;
}

namespace {

// Fisher-Yates with rejection sampling so the permutation depends only on the
// 64-bit engine output, not on the standard library's distributions.
template <typename T>
void deterministic_shuffle(std::vector<T>& items, std::mt19937_64& engine) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::uint64_t bound = i;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t draw;
    do {
      draw = engine();
    } while (draw >= limit);
    std::swap(items[i - 1], items[static_cast<std::size_t>(draw % bound)]);
  }
}

void validate_ratios(const std::array<double, 3>& ratios) {
  double sum = 0.0;
  bool any_positive = false;
  for (double r : ratios) {
    if (!std::isfinite(r) || r < 0.0) {
      throw ValidationError("split ratios must be finite and non-negative");
    }
    any_positive = any_positive || r > 0.0;
    sum += r;
  }
  if (!any_positive || std::abs(sum - 1.0) > 1e-9) {
    throw ValidationError("split ratios must sum to 1");
  }
}

struct Unit {
  std::string key;
  std::vector<std::string> image_ids;
  bool positive = false;
};

void assign_units(std::vector<Unit>& units, const std::array<double, 3>& ratios,
                  std::mt19937_64& engine, SplitAssignment& out) {
  deterministic_shuffle(units, engine);
  auto sizes = split_sizes(units.size(), ratios);
  std::size_t next = 0;
  for (int s = 0; s < 3; ++s) {
    for (std::size_t k = 0; k < sizes[s]; ++k, ++next) {
      for (const auto& id : units[next].image_ids) {
        out.emplace(id, static_cast<Split>(s));
      }
    }
  }
}

} // namespace

SplitAssignment generate_split(const DatasetManifest& manifest, const SplitOptions& options) {
  validate_ratios(options.ratios);
  const bool all_nonzero = std::all_of(options.ratios.begin(), options.ratios.end(),
                                       [](double r) { return r > 0.0; });
  if (all_nonzero && manifest.images.size() < 3) {
    throw ValidationError("need at least 3 images to fill three non-empty splits");
  }

  std::map<std::string, Unit> grouped;
  for (const auto& image : manifest.images) {
    std::string key = "image:" + image.image_id;
    if (options.group_by_capture && image.capture) {
      key = "capture:" + image.capture->capture_id;
    }
    auto& unit = grouped[key];
    unit.key = key;
    unit.image_ids.push_back(image.image_id);
    unit.positive = unit.positive || !image.objects.empty();
  }
  for (auto& [key, unit] : grouped) {
    std::sort(unit.image_ids.begin(), unit.image_ids.end());
  }

  std::mt19937_64 engine(options.seed);
  SplitAssignment out;
  if (options.stratify) {
    std::vector<Unit> positives;
    std::vector<Unit> negatives;
    for (auto& [key, unit] : grouped) {
      (unit.positive ? positives : negatives).push_back(std::move(unit));
    }
    assign_units(positives, options.ratios, engine, out);
    assign_units(negatives, options.ratios, engine, out);
  } else {
    std::vector<Unit> units;
    units.reserve(grouped.size());
    for (auto& [key, unit] : grouped) {
      units.push_back(std::move(unit));
    }
    assign_units(units, options.ratios, engine, out);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Validation against declared numbers
// ---------------------------------------------------------------------------

std::string to_string(Discrepancy::Kind kind) {
  switch (kind) {
  case Discrepancy::Kind::count_mismatch:
    return "count_mismatch";
  case Discrepancy::Kind::percent_mismatch:
    return "percent_mismatch";
  case Discrepancy::Kind::sum_mismatch:
    return "sum_mismatch";
  case Discrepancy::Kind::partition_mismatch:
    return "partition_mismatch";
  }
  return "count_mismatch";
}

namespace {

constexpr std::array<const char*, 4> kFields{"images", "objects", "positives", "negatives"};

const DeclaredValue& declared_field(const DeclaredRow& row, int f) {
  switch (f) {
  case 0:
    return row.images;
  case 1:
    return row.objects;
  case 2:
    return row.positives;
  default:
    return row.negatives;
  }
}

std::int64_t count_field(const SplitCounts& c, int f) {
  switch (f) {
  case 0:
    return c.images;
  case 1:
    return c.objects;
  case 2:
    return c.positives;
  default:
    return c.negatives;
  }
}

std::optional<double> share_field(const SplitShare& s, int f) {
  switch (f) {
  case 0:
    return s.images;
  case 1:
    return s.objects;
  case 2:
    return s.positives;
  default:
    return s.negatives;
  }
}

int decimals_of(const std::string& text) {
  auto dot = text.find('.');
  return dot == std::string::npos ? 0 : static_cast<int>(text.size() - dot - 1);
}

std::string strip_percent(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.back() == '%') {
    text.remove_suffix(1);
  }
  return std::string(trim(text));
}

void compare_row(const std::string& name, const DeclaredRow& declared, const SplitCounts& counts,
                 const SplitShare& shares, std::vector<Discrepancy>& out) {
  for (int f = 0; f < 4; ++f) {
    const auto& d = declared_field(declared, f);
    if (d.count) {
      std::int64_t observed = count_field(counts, f);
      if (observed != *d.count) {
        out.push_back({Discrepancy::Kind::count_mismatch, Severity::error, name, kFields[f],
                       std::to_string(*d.count), std::to_string(observed), observed - *d.count,
                       name + " " + kFields[f] + ": declared " + std::to_string(*d.count) +
                           ", observed " + std::to_string(observed)});
      }
    }
    if (d.percent) {
      const std::string want = strip_percent(*d.percent);
      const std::string got = format_percent(share_field(shares, f), decimals_of(want));
      if (want != got) {
        out.push_back({Discrepancy::Kind::percent_mismatch, Severity::warning, name, kFields[f],
                       want + "%", got.empty() ? "undefined" : got + "%", 0,
                       name + " " + kFields[f] + ": declared " + want + "%, observed " +
                           (got.empty() ? "undefined" : got + "%")});
      }
    }
  }

  if (declared.images.count && declared.positives.count && declared.negatives.count) {
    std::int64_t sum = *declared.positives.count + *declared.negatives.count;
    if (sum != *declared.images.count) {
      out.push_back({Discrepancy::Kind::partition_mismatch, Severity::error, name, "images",
                     std::to_string(*declared.images.count), std::to_string(sum),
                     sum - *declared.images.count,
                     name + ": declared positives + negatives = " + std::to_string(sum) +
                         " but declared images = " + std::to_string(*declared.images.count)});
    }
  }
}

} // namespace

std::vector<Discrepancy> validate_accounting(const SplitAccounting& observed,
                                             const DeclaredAccounting& expected) {
  std::vector<Discrepancy> out;
  for (Split s : kAllSplits) {
    if (const auto& row = expected.splits[static_cast<int>(s)]) {
      compare_row(to_string(s), *row, observed[s], observed.share(s), out);
    }
  }
  if (expected.total) {
    compare_row("total", *expected.total, observed.total, observed.total_share(), out);

    for (int f = 0; f < 4; ++f) {
      const auto& total = declared_field(*expected.total, f);
      if (!total.count) {
        continue;
      }
      std::int64_t sum = 0;
      bool complete = true;
      std::string terms;
      for (Split s : kAllSplits) {
        const auto& row = expected.splits[static_cast<int>(s)];
        if (!row || !declared_field(*row, f).count) {
          complete = false;
          break;
        }
        std::int64_t v = *declared_field(*row, f).count;
        sum += v;
        terms += (terms.empty() ? "" : "+") + std::to_string(v);
      }
      if (complete && sum != *total.count) {
        std::int64_t delta = sum - *total.count;
        out.push_back({Discrepancy::Kind::sum_mismatch, Severity::error, "total", kFields[f],
                       std::to_string(*total.count), std::to_string(sum), delta,
                       std::string("declared ") + kFields[f] + " " + terms + " = " +
                           std::to_string(sum) + " but declared total is " +
                           std::to_string(*total.count) + " (" + (delta > 0 ? "+" : "") +
                           std::to_string(delta) + ")"});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV and tables
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kAccountingHeader =
    "split,images,pct_images,objects,pct_objects,positives,pct_positives,negatives,pct_negatives";

std::string csv_row(const std::string& name, const SplitCounts& c, const SplitShare& s) {
  return name + ',' + std::to_string(c.images) + ',' + format_percent(s.images, 1) + ',' +
         std::to_string(c.objects) + ',' + format_percent(s.objects, 1) + ',' +
         std::to_string(c.positives) + ',' + format_percent(s.positives, 2) + ',' +
         std::to_string(c.negatives) + ',' + format_percent(s.negatives, 2) + '\n';
}

} // namespace

std::string accounting_csv(const SplitAccounting& accounting) {
  std::string out = std::string(kAccountingHeader) + '\n';
  for (Split s : kAllSplits) {
    out += csv_row(to_string(s), accounting[s], accounting.share(s));
  }
  out += csv_row("total", accounting.total, accounting.total_share());
  return out;
}

DeclaredAccounting parse_declared_accounting(std::string_view csv) {
  std::istringstream in{std::string(csv)};
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      for (auto& h : split_fields(trim(line), ',')) {
        header.emplace_back(trim(h));
      }
    }
  }
  if (header.empty()) {
    throw ParseError("missing header row", line_no);
  }
  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) {
    column[header[i]] = i;
  }
  if (!column.contains("split")) {
    throw ParseError("header lacks a 'split' column", line_no, "split");
  }

  DeclaredAccounting declared;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) {
      continue;
    }
    auto cells = split_fields(trim(line), ',');
    if (cells.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " cells, got " +
                           std::to_string(cells.size()),
                       line_no);
    }
    auto cell = [&](const std::string& name) -> std::string {
      auto it = column.find(name);
      return it == column.end() ? std::string{} : std::string(trim(cells[it->second]));
    };
    DeclaredRow row;
    auto read = [&](const std::string& field, DeclaredValue& value) {
      if (auto text = cell(field); !text.empty()) {
        auto n = parse_integer(text);
        if (!n || *n < 0) {
          throw ParseError("expected a non-negative integer, got '" + text + "'", line_no, field);
        }
        value.count = *n;
      }
      if (auto text = cell("pct_" + field); !text.empty()) {
        std::string stripped = strip_percent(text);
        if (!parse_double(stripped)) {
          throw ParseError("expected a percentage, got '" + text + "'", line_no, "pct_" + field);
        }
        value.percent = stripped;
      }
    };
    read("images", row.images);
    read("objects", row.objects);
    read("positives", row.positives);
    read("negatives", row.negatives);

    const std::string name = cell("split");
    if (name == "total") {
      declared.total = row;
    } else {
      Split s;
      try {
        s = split_from_string(name);
      } catch (const ValidationError& e) {
        throw ParseError(e.what(), line_no, "split");
      }
      declared.splits[static_cast<int>(s)] = row;
    }
  }
  return declared;
}

namespace {

std::string cell(std::int64_t count, std::optional<double> share, int decimals) {
  std::string text = std::to_string(count);
  if (share) {
    text += " (" + format_percent(share, decimals) + "%)";
  }
  return text;
}

} // namespace

std::string render_accounting_tables(const SplitAccounting& acc) {
  std::ostringstream out;
  out << "\tTraining\tValidation\tTest\tTotal\n";
  auto row = [&](const char* label, auto count_of, auto share_of, int decimals) {
    out << label;
    for (Split s : kAllSplits) {
      out << '\t' << cell(count_of(acc[s]), share_of(acc.share(s)), decimals);
    }
    out << '\t' << count_of(acc.total) << '\n';
  };
  row("Total number of images", [](const SplitCounts& c) { return c.images; },
      [](const SplitShare& s) { return s.images; }, 1);
  row("Total labelled objects", [](const SplitCounts& c) { return c.objects; },
      [](const SplitShare& s) { return s.objects; }, 1);
  row("Images with positive samples", [](const SplitCounts& c) { return c.positives; },
      [](const SplitShare& s) { return s.positives; }, 2);
  row("Images with negative samples", [](const SplitCounts& c) { return c.negatives; },
      [](const SplitShare& s) { return s.negatives; }, 2);
  if (acc.total.images > 0) {
    out << "Positive fraction\t"
        << format_percent(static_cast<double>(acc.total.positives) /
                              static_cast<double>(acc.total.images),
                          1)
        << "%\n";
  }
  return out.str();
}

} // namespace protoeval
