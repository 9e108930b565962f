#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drgrade/classifiers.hpp"
#include "drgrade/features.hpp"

namespace drgrade::eval {

using Confusion = std::array<std::array<std::size_t, features::kNumClasses>, features::kNumClasses>;

/// Fraction of matching labels. Throws LengthMismatch / EmptyInput.
double accuracy(std::span<const int> pred, std::span<const int> truth);

/// Entry (i, j) counts truth i predicted j. Throws OutOfRangeLabel.
Confusion confusion_matrix(std::span<const int> pred, std::span<const int> truth);

/// Accuracy as a percentage with two decimals: 0.9255 -> "92.55".
std::string format_percent(double fraction);

std::vector<int> labels_of(const features::FeatureTable& table);

/// Share of the largest class in `table`.
double majority_baseline(const features::FeatureTable& table);

struct ReportEntry {
  ml::ModelKind kind = ml::ModelKind::MLP;
  std::string name;
  double val_accuracy = 0.0;
  double test_accuracy = 0.0;
  Confusion confusion{};  // on the test split
  std::string error;      // non-empty when fitting or prediction failed
};

struct EvalReport {
  std::vector<ReportEntry> entries;  // descending test accuracy, failures last
  double majority_baseline = 0.0;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  std::size_t n_test = 0;

  std::string to_text() const;
  std::string to_json() const;
};

struct SuiteConfig {
  std::vector<ml::ModelKind> enabled{ml::kAllModelKinds.begin(), ml::kAllModelKinds.end()};
  ml::ClassifierConfig classifiers;
};

ReportEntry evaluate_model(const ml::TrainedModel& model, const features::SplitSet& splits);

/// Trains every enabled classifier on train and scores val and test. A
/// failing classifier is reported with its error instead of aborting.
EvalReport evaluate_suite(const features::SplitSet& splits, const SuiteConfig& config);

/// Builds a report from already-trained models.
EvalReport evaluate_models(const std::vector<ml::TrainedModel>& models,
                           const features::SplitSet& splits);

struct FeatureGroup {
  std::string name;
  std::vector<std::string> columns;
};

/// eye, counts, weighted_area_sums, center_means, center_stds.
std::vector<FeatureGroup> default_feature_groups();

struct AblationEntry {
  std::string group;
  double baseline_accuracy = 0.0;
  double ablated_accuracy = 0.0;
  double delta = 0.0;  // baseline - ablated
};

struct AblationReport {
  std::string classifier;
  double baseline_accuracy = 0.0;
  std::vector<AblationEntry> entries;  // descending delta

  std::string to_text() const;
  std::string to_json() const;
};

/// Throws InvalidArgument before any training when `groups` do not
/// partition the table's columns.
void check_partition(const std::vector<FeatureGroup>& groups,
                     const std::vector<std::string>& feature_order);

/// Retrains `kind` once with all columns and once per group with that
/// group's columns removed; test accuracy deltas.
AblationReport ablation(const features::SplitSet& splits, ml::ModelKind kind,
                        const ml::ClassifierConfig& config,
                        const std::vector<FeatureGroup>& groups = default_feature_groups());

}  // namespace drgrade::eval
