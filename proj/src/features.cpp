#include "drgrade/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include <json.hpp>

#include "drgrade/error.hpp"
#include "drgrade/random.hpp"
#include "drgrade/text.hpp"

namespace drgrade::features {

using detect::Detections;
using detect::LesionInstance;
using detect::LesionType;
using detect::Manifest;

std::vector<std::string> default_feature_order() {
  return {kFeatureNames.begin(), kFeatureNames.end()};
}

double Scaler::apply(std::size_t column, double value) const {
  const auto [lo, hi] = ranges.at(column);
  if (!(hi > lo)) return 0.0;
  return (value - lo) / (hi - lo);
}

std::size_t FeatureTable::column_index(std::string_view name) const {
  const auto it = std::find(feature_order.begin(), feature_order.end(), name);
  if (it == feature_order.end()) {
    throw Error(Errc::SchemaMismatch, "unknown column " + std::string(name));
  }
  return static_cast<std::size_t>(it - feature_order.begin());
}

FeatureTable FeatureTable::select_columns(const std::vector<std::string>& columns) const {
  std::vector<std::size_t> idx;
  idx.reserve(columns.size());
  for (const auto& c : columns) idx.push_back(column_index(c));

  FeatureTable out;
  out.feature_order = columns;
  out.rows.reserve(rows.size());
  for (const auto& r : rows) {
    ImageFeatureRow projected{r.image_id, {}, r.label};
    projected.values.reserve(idx.size());
    for (auto i : idx) projected.values.push_back(r.values[i]);
    out.rows.push_back(std::move(projected));
  }
  if (scaler) {
    Scaler s;
    s.columns = columns;
    for (auto i : idx) s.ranges.push_back(scaler->ranges.at(i));
    out.scaler = std::move(s);
  }
  return out;
}

std::array<std::size_t, kNumClasses> FeatureTable::class_counts() const {
  std::array<std::size_t, kNumClasses> counts{};
  for (const auto& r : rows) {
    if (r.label >= 0 && r.label < kNumClasses) ++counts[static_cast<std::size_t>(r.label)];
  }
  return counts;
}

Detections prune_low_confidence(const Detections& instances, double ex_threshold) {
  Detections out;
  out.reserve(instances.size());
  std::copy_if(instances.begin(), instances.end(), std::back_inserter(out),
               [&](const LesionInstance& inst) {
                 return inst.lesion_type != LesionType::EX || !(inst.confidence < ex_threshold);
               });
  return out;
}

double weighted_area(const LesionInstance& inst) noexcept {
  return inst.confidence * inst.mask_area;
}

int remap_severity(int raw) {
  switch (raw) {
    case 0:
    case 1: return 0;
    case 2: return 1;
    case 3:
    case 4: return 2;
    default:
      throw Error(Errc::OutOfRange, "raw severity " + std::to_string(raw) + " is outside 0..4");
  }
}

namespace {

struct Moments {
  double mean = 0.0;
  double stddev = 0.0;
};

// Two-pass population moments.
Moments moments(const std::vector<double>& xs) {
  if (xs.empty()) return {};
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / n)};
}

struct TypeAccumulator {
  std::size_t count = 0;
  double wsum = 0.0;
  std::vector<double> cx;
  std::vector<double> cy;
};

FeatureTable with_rows(const FeatureTable& like, std::vector<ImageFeatureRow> rows) {
  FeatureTable out;
  out.feature_order = like.feature_order;
  out.scaler = like.scaler;
  out.rows = std::move(rows);
  return out;
}

}  // namespace

std::vector<ImageFeatureRow> aggregate_per_image(const Manifest& manifest,
                                                 const Detections& instances) {
  std::unordered_map<std::string, std::size_t> index;
  index.reserve(manifest.size());
  for (std::size_t i = 0; i < manifest.size(); ++i) index.emplace(manifest[i].image_id, i);

  std::vector<std::array<TypeAccumulator, 2>> acc(manifest.size());
  for (const auto& inst : instances) {
    const auto it = index.find(inst.image_id);
    if (it == index.end()) {
      throw Error(Errc::OrphanInstance, "instance references unknown image " + inst.image_id);
    }
    auto& a = acc[it->second][inst.lesion_type == LesionType::EX ? 0 : 1];
    ++a.count;
    a.wsum += weighted_area(inst);
    a.cx.push_back(inst.center[0]);
    a.cy.push_back(inst.center[1]);
  }

  std::vector<ImageFeatureRow> rows;
  rows.reserve(manifest.size());
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const auto& ex = acc[i][0];
    const auto& ma = acc[i][1];
    const auto mx_ex = moments(ex.cx);
    const auto my_ex = moments(ex.cy);
    const auto mx_ma = moments(ma.cx);
    const auto my_ma = moments(ma.cy);
    ImageFeatureRow row;
    row.image_id = manifest[i].image_id;
    row.label = remap_severity(manifest[i].severity_raw);
    row.values = {manifest[i].eye == detect::Eye::Left ? 0.0 : 1.0,
                  static_cast<double>(ex.count),
                  static_cast<double>(ma.count),
                  ex.wsum,
                  ma.wsum,
                  mx_ex.mean,
                  my_ex.mean,
                  mx_ex.stddev,
                  my_ex.stddev,
                  mx_ma.mean,
                  my_ma.mean,
                  mx_ma.stddev,
                  my_ma.stddev};
    rows.push_back(std::move(row));
  }
  return rows;
}

FeatureTable zscore_filter(const FeatureTable& table, double k) {
  const std::size_t cols = table.feature_order.size();
  std::vector<Moments> stats(cols);
  std::vector<double> column(table.rows.size());
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t r = 0; r < table.rows.size(); ++r) column[r] = table.rows[r].values[c];
    stats[c] = moments(column);
  }

  std::vector<ImageFeatureRow> kept;
  kept.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    bool outlier = false;
    for (std::size_t c = 0; c < cols && !outlier; ++c) {
      const auto& s = stats[c];
      outlier = s.stddev > 0.0 && std::abs(row.values[c] - s.mean) > k * s.stddev;
    }
    if (!outlier) kept.push_back(row);
  }
  return with_rows(table, std::move(kept));
}

FeatureTable undersample_majority(const FeatureTable& table, std::uint64_t seed) {
  const auto counts = table.class_counts();
  const std::size_t target = std::max(counts[1], counts[2]);
  if (counts[0] <= target) return table;

  std::vector<std::size_t> majority;
  majority.reserve(counts[0]);
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    if (table.rows[i].label == 0) majority.push_back(i);
  }
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(majority));
  std::vector<bool> keep(table.rows.size(), true);
  for (std::size_t j = target; j < majority.size(); ++j) keep[majority[j]] = false;

  std::vector<ImageFeatureRow> rows;
  rows.reserve(table.rows.size() - (counts[0] - target));
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    if (keep[i]) rows.push_back(table.rows[i]);
  }
  return with_rows(table, std::move(rows));
}

Scaler fit_scaler(const FeatureTable& table) {
  if (table.rows.empty()) throw Error(Errc::EmptyTable, "cannot fit a scaler on an empty table");
  Scaler s;
  s.columns = table.feature_order;
  for (std::size_t c = 0; c < table.feature_order.size(); ++c) {
    double lo = table.rows.front().values[c];
    double hi = lo;
    for (const auto& r : table.rows) {
      lo = std::min(lo, r.values[c]);
      hi = std::max(hi, r.values[c]);
    }
    s.ranges.emplace_back(lo, hi);
  }
  return s;
}

FeatureTable apply_scaler(const FeatureTable& table, const Scaler& scaler) {
  if (scaler.columns != table.feature_order) {
    throw Error(Errc::SchemaMismatch, "scaler columns do not match the table");
  }
  FeatureTable out = with_rows(table, table.rows);
  for (auto& r : out.rows) {
    for (std::size_t c = 0; c < r.values.size(); ++c) r.values[c] = scaler.apply(c, r.values[c]);
  }
  out.scaler = scaler;
  return out;
}

FeatureTable minmax_normalize(const FeatureTable& table) {
  return apply_scaler(table, fit_scaler(table));
}

SplitSet split(const FeatureTable& table, std::uint64_t seed) {
  const std::size_t n = table.rows.size();
  if (n < 10) {
    throw Error(Errc::TooFewRows, "need at least 10 rows to split, have " + std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  const std::size_t n_train = n * 8 / 10;
  const std::size_t n_val = n / 10;
  auto take = [&](std::size_t from, std::size_t to) {
    std::vector<ImageFeatureRow> rows;
    rows.reserve(to - from);
    for (std::size_t i = from; i < to; ++i) rows.push_back(table.rows[order[i]]);
    return with_rows(table, std::move(rows));
  };
  SplitSet out;
  out.seed = seed;
  out.train = take(0, n_train);
  out.val = take(n_train, n_train + n_val);
  out.test = take(n_train + n_val, n);
  return out;
}

FeatureBuild build_feature_table(const Manifest& manifest, const Detections& detections,
                                 const FeatureConfig& config, std::uint64_t seed) {
  FeatureBuild out;
  out.counts.instances_in = detections.size();
  const auto pruned = prune_low_confidence(detections, config.ex_threshold);
  out.counts.instances_pruned = pruned.size();

  FeatureTable table;
  table.rows = aggregate_per_image(manifest, pruned);
  out.counts.aggregated = table.rows.size();

  table = zscore_filter(table, config.zscore_k);
  out.counts.after_zscore = table.rows.size();

  table = undersample_majority(table, derive_seed(seed, 0));
  out.counts.after_undersample = table.rows.size();
  if (table.rows.empty()) throw Error(Errc::EmptyTable, "no rows left after filtering");

  const auto split_seed = derive_seed(seed, 1);
  if (config.scaler_fit == ScalerFit::Full) {
    out.table = minmax_normalize(table);
    out.splits = split(out.table, split_seed);
  } else {
    out.table = table;
    auto raw = split(table, split_seed);
    const auto scaler = fit_scaler(raw.train);
    out.splits.train = apply_scaler(raw.train, scaler);
    out.splits.val = apply_scaler(raw.val, scaler);
    out.splits.test = apply_scaler(raw.test, scaler);
  }
  out.splits.seed = seed;
  return out;
}

// --- persistence ---------------------------------------------------------

void write_table_csv(std::ostream& out, const FeatureTable& table) {
  out << "image_id";
  for (const auto& c : table.feature_order) out << ',' << c;
  out << ",label\n";
  for (const auto& r : table.rows) {
    out << r.image_id;
    for (double v : r.values) out << ',' << text::format_double(v);
    out << ',' << r.label << '\n';
  }
}

void save_table_csv(const std::filesystem::path& path, const FeatureTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  write_table_csv(out, table);
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

FeatureTable read_table_csv(std::istream& in) {
  FeatureTable table;
  std::string line;
  std::size_t number = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++number;
    const auto trimmed = text::trim(line);
    if (trimmed.empty()) continue;
    const auto cells = text::split(trimmed, ',');
    if (!header) {
      if (cells.size() < 3 || cells.front() != "image_id" || cells.back() != "label") {
        throw Error(Errc::SchemaMismatch, "feature CSV header must be image_id,...,label", number);
      }
      table.feature_order.assign(cells.begin() + 1, cells.end() - 1);
      header = true;
      continue;
    }
    if (cells.size() != table.feature_order.size() + 2) {
      throw Error(Errc::ParseError, "wrong number of columns", number);
    }
    ImageFeatureRow row;
    row.image_id = std::string(cells.front());
    for (std::size_t c = 1; c + 1 < cells.size(); ++c) {
      const auto v = text::parse_double(cells[c]);
      if (!v) throw Error(Errc::ParseError, "non-numeric value '" + std::string(cells[c]) + "'", number);
      row.values.push_back(*v);
    }
    const auto label = text::parse_int(cells.back());
    if (!label || *label < 0 || *label >= kNumClasses) {
      throw Error(Errc::ParseError, "label must be 0, 1 or 2", number);
    }
    row.label = static_cast<int>(*label);
    table.rows.push_back(std::move(row));
  }
  if (!header) throw Error(Errc::SchemaMismatch, "feature CSV is empty", 1);
  return table;
}

FeatureTable load_table_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  return read_table_csv(in);
}

std::string scaler_to_json(const Scaler& scaler) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t c = 0; c < scaler.columns.size(); ++c) {
    j[scaler.columns[c]] = {scaler.ranges[c].first, scaler.ranges[c].second};
  }
  return j.dump(2) + "\n";
}

Scaler scaler_from_json(std::string_view json) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(json);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::ParseError, e.what());
  }
  if (!j.is_object()) throw Error(Errc::ParseError, "scaler JSON must be an object");
  Scaler s;
  for (const auto& [key, value] : j.items()) {
    if (!value.is_array() || value.size() != 2 || !value[0].is_number() || !value[1].is_number()) {
      throw Error(Errc::ParseError, "scaler entry " + key + " must be [min, max]");
    }
    s.columns.push_back(key);
    s.ranges.emplace_back(value[0].get<double>(), value[1].get<double>());
  }
  return s;
}

}  // namespace drgrade::features
