#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "drgrade/detections.hpp"

namespace drgrade::features {

inline constexpr int kNumClasses = 3;

/// Column order of the per-image feature vector.
inline constexpr std::array<std::string_view, 13> kFeatureNames = {
    "eye_code",   "count_ex",   "count_ma",   "wsum_ex",    "wsum_ma",
    "mean_cx_ex", "mean_cy_ex", "std_cx_ex",  "std_cy_ex",  "mean_cx_ma",
    "mean_cy_ma", "std_cx_ma",  "std_cy_ma"};

std::vector<std::string> default_feature_order();

struct ImageFeatureRow {
  std::string image_id;
  std::vector<double> values;  // aligned with FeatureTable::feature_order
  int label = 0;

  friend bool operator==(const ImageFeatureRow&, const ImageFeatureRow&) = default;
};

/// Per-column (min, max) fitted by minmax_normalize.
struct Scaler {
  std::vector<std::string> columns;
  std::vector<std::pair<double, double>> ranges;

  double apply(std::size_t column, double value) const;
  friend bool operator==(const Scaler&, const Scaler&) = default;
};

struct FeatureTable {
  std::vector<std::string> feature_order = default_feature_order();
  std::vector<ImageFeatureRow> rows;
  std::optional<Scaler> scaler;

  std::size_t size() const noexcept { return rows.size(); }
  std::size_t column_index(std::string_view name) const;  // throws SchemaMismatch

  /// Keeps only `columns` (in the given order); scaler is projected too.
  FeatureTable select_columns(const std::vector<std::string>& columns) const;
  std::array<std::size_t, kNumClasses> class_counts() const;
};

struct SplitSet {
  FeatureTable train;
  FeatureTable val;
  FeatureTable test;
  std::uint64_t seed = 0;
};

// --- individual stages ---------------------------------------------------

/// Drops EX instances with confidence strictly below `ex_threshold`.
detect::Detections prune_low_confidence(const detect::Detections& instances,
                                        double ex_threshold = 0.65);

double weighted_area(const detect::LesionInstance& inst) noexcept;

/// {0,1} -> 0, {2} -> 1, {3,4} -> 2. Throws OutOfRange otherwise.
int remap_severity(int raw);

/// One row per manifest entry in manifest order. Throws OrphanInstance for
/// an instance whose image_id is not in the manifest.
std::vector<ImageFeatureRow> aggregate_per_image(const detect::Manifest& manifest,
                                                 const detect::Detections& instances);

/// Single pass: drops every row with |x - mean| > k * std (population std)
/// in any column. Zero-variance columns never drop.
FeatureTable zscore_filter(const FeatureTable& table, double k = 2.0);

/// Subsamples class 0 (without replacement) to the largest non-zero class
/// count. Survivors keep their relative order.
FeatureTable undersample_majority(const FeatureTable& table, std::uint64_t seed);

/// Fits per-column min/max and maps to [0, 1]; constant columns map to 0.
FeatureTable minmax_normalize(const FeatureTable& table);
Scaler fit_scaler(const FeatureTable& table);
FeatureTable apply_scaler(const FeatureTable& table, const Scaler& scaler);

/// Seeded Fisher-Yates, then floor(0.8 N) / floor(0.1 N) / rest.
SplitSet split(const FeatureTable& table, std::uint64_t seed);

// --- full stage ----------------------------------------------------------

enum class ScalerFit { Full, TrainOnly };

struct FeatureConfig {
  double ex_threshold = 0.65;
  double zscore_k = 2.0;
  ScalerFit scaler_fit = ScalerFit::Full;
};

struct StageCounts {
  std::size_t instances_in = 0;
  std::size_t instances_pruned = 0;  // survivors after pruning
  std::size_t aggregated = 0;
  std::size_t after_zscore = 0;
  std::size_t after_undersample = 0;
};

struct FeatureBuild {
  SplitSet splits;
  FeatureTable table;  // post-normalization, pre-split (Full) or unscaled (TrainOnly)
  StageCounts counts;
};

/// prune -> aggregate -> zscore_filter -> undersample -> normalize -> split.
FeatureBuild build_feature_table(const detect::Manifest& manifest,
                                 const detect::Detections& detections,
                                 const FeatureConfig& config, std::uint64_t seed);

// --- persistence ---------------------------------------------------------

void write_table_csv(std::ostream& out, const FeatureTable& table);
void save_table_csv(const std::filesystem::path& path, const FeatureTable& table);
FeatureTable read_table_csv(std::istream& in);
FeatureTable load_table_csv(const std::filesystem::path& path);

std::string scaler_to_json(const Scaler& scaler);
Scaler scaler_from_json(std::string_view json);

}  // namespace drgrade::features
