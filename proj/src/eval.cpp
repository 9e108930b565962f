#include "drgrade/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include <json.hpp>

#include "drgrade/error.hpp"

namespace drgrade::eval {

using nlohmann::ordered_json;

double accuracy(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size()) {
    throw Error(Errc::LengthMismatch, "prediction and truth lengths differ");
  }
  if (truth.empty()) throw Error(Errc::EmptyInput, "accuracy of an empty label vector");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += pred[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

Confusion confusion_matrix(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size()) {
    throw Error(Errc::LengthMismatch, "prediction and truth lengths differ");
  }
  Confusion m{};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i];
    const int p = pred[i];
    if (t < 0 || t >= features::kNumClasses || p < 0 || p >= features::kNumClasses) {
      throw Error(Errc::OutOfRangeLabel, "label outside 0..2 at position " + std::to_string(i));
    }
    ++m[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  return m;
}

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", std::round(fraction * 10000.0) / 100.0);
  return buf;
}

std::vector<int> labels_of(const features::FeatureTable& table) {
  std::vector<int> out;
  out.reserve(table.rows.size());
  for (const auto& r : table.rows) out.push_back(r.label);
  return out;
}

double majority_baseline(const features::FeatureTable& table) {
  if (table.rows.empty()) return 0.0;
  const auto counts = table.class_counts();
  return static_cast<double>(*std::max_element(counts.begin(), counts.end())) /
         static_cast<double>(table.rows.size());
}

namespace {

void sort_entries(std::vector<ReportEntry>& entries) {
  std::stable_sort(entries.begin(), entries.end(), [](const ReportEntry& a, const ReportEntry& b) {
    const bool a_ok = a.error.empty();
    const bool b_ok = b.error.empty();
    if (a_ok != b_ok) return a_ok;
    return a.test_accuracy > b.test_accuracy;
  });
}

EvalReport empty_report(const features::SplitSet& splits) {
  EvalReport report;
  report.majority_baseline = majority_baseline(splits.test);
  report.n_train = splits.train.size();
  report.n_val = splits.val.size();
  report.n_test = splits.test.size();
  return report;
}

ordered_json confusion_json(const Confusion& c) {
  ordered_json rows = ordered_json::array();
  for (const auto& r : c) rows.push_back(r);
  return rows;
}

}  // namespace

ReportEntry evaluate_model(const ml::TrainedModel& model, const features::SplitSet& splits) {
  ReportEntry e;
  e.kind = model.kind;
  e.name = std::string(ml::display_name(model.kind));
  const auto val_truth = labels_of(splits.val);
  const auto test_truth = labels_of(splits.test);
  const auto val_pred = ml::predict(model, splits.val);
  const auto test_pred = ml::predict(model, splits.test);
  e.val_accuracy = val_truth.empty() ? 0.0 : accuracy(val_pred, val_truth);
  e.test_accuracy = accuracy(test_pred, test_truth);
  e.confusion = confusion_matrix(test_pred, test_truth);
  return e;
}

EvalReport evaluate_suite(const features::SplitSet& splits, const SuiteConfig& config) {
  if (config.enabled.empty()) throw Error(Errc::ConfigError, "no classifier enabled");
  EvalReport report = empty_report(splits);
  for (const auto kind : config.enabled) {
    try {
      const auto model = ml::fit_model(kind, splits.train, config.classifiers);
      report.entries.push_back(evaluate_model(model, splits));
    } catch (const std::exception& ex) {
      ReportEntry failed;
      failed.kind = kind;
      failed.name = std::string(ml::display_name(kind));
      failed.error = ex.what();
      report.entries.push_back(std::move(failed));
    }
  }
  sort_entries(report.entries);
  return report;
}

EvalReport evaluate_models(const std::vector<ml::TrainedModel>& models,
                           const features::SplitSet& splits) {
  EvalReport report = empty_report(splits);
  for (const auto& model : models) {
    try {
      report.entries.push_back(evaluate_model(model, splits));
    } catch (const std::exception& ex) {
      ReportEntry failed;
      failed.kind = model.kind;
      failed.name = std::string(ml::display_name(model.kind));
      failed.error = ex.what();
      report.entries.push_back(std::move(failed));
    }
  }
  sort_entries(report.entries);
  return report;
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-22s %9s %9s\n", "Classifier", "Val (%)", "Test (%)");
  out << line;
  out << std::string(22, '-') << ' ' << std::string(9, '-') << ' ' << std::string(9, '-') << '\n';
  for (const auto& e : entries) {
    if (!e.error.empty()) {
      std::snprintf(line, sizeof line, "%-22s %9s %9s  %s\n", e.name.c_str(), "-", "-", "FAILED");
    } else {
      std::snprintf(line, sizeof line, "%-22s %9s %9s\n", e.name.c_str(),
                    format_percent(e.val_accuracy).c_str(), format_percent(e.test_accuracy).c_str());
    }
    out << line;
  }
  out << "\nMajority-class baseline (test): " << format_percent(majority_baseline) << '\n';
  out << "Rows train/val/test: " << n_train << '/' << n_val << '/' << n_test << '\n';
  for (const auto& e : entries) {
    if (!e.error.empty()) out << "Error [" << e.name << "]: " << e.error << '\n';
  }
  return out.str();
}

std::string EvalReport::to_json() const {
  ordered_json doc;
  doc["n_train"] = n_train;
  doc["n_val"] = n_val;
  doc["n_test"] = n_test;
  doc["majority_baseline"] = majority_baseline;
  ordered_json rows = ordered_json::array();
  for (const auto& e : entries) {
    ordered_json r;
    r["kind"] = ml::kind_code(e.kind);
    r["name"] = e.name;
    if (e.error.empty()) {
      r["val_accuracy"] = e.val_accuracy;
      r["test_accuracy"] = e.test_accuracy;
      r["confusion"] = confusion_json(e.confusion);
    } else {
      r["error"] = e.error;
    }
    rows.push_back(std::move(r));
  }
  doc["classifiers"] = std::move(rows);
  return doc.dump(2) + "\n";
}

std::vector<FeatureGroup> default_feature_groups() {
  return {
      {"eye", {"eye_code"}},
      {"counts", {"count_ex", "count_ma"}},
      {"weighted_area_sums", {"wsum_ex", "wsum_ma"}},
      {"center_means", {"mean_cx_ex", "mean_cy_ex", "mean_cx_ma", "mean_cy_ma"}},
      {"center_stds", {"std_cx_ex", "std_cy_ex", "std_cx_ma", "std_cy_ma"}},
  };
}

void check_partition(const std::vector<FeatureGroup>& groups,
                     const std::vector<std::string>& feature_order) {
  if (groups.empty()) throw Error(Errc::InvalidArgument, "no feature groups given");
  std::multiset<std::string> grouped;
  for (const auto& g : groups) {
    if (g.columns.empty()) throw Error(Errc::InvalidArgument, "feature group " + g.name + " is empty");
    grouped.insert(g.columns.begin(), g.columns.end());
  }
  const std::multiset<std::string> columns(feature_order.begin(), feature_order.end());
  if (grouped != columns) {
    throw Error(Errc::InvalidArgument,
                "feature groups must partition the table columns (each column exactly once)");
  }
}

AblationReport ablation(const features::SplitSet& splits, ml::ModelKind kind,
                        const ml::ClassifierConfig& config, const std::vector<FeatureGroup>& groups) {
  const auto& order = splits.train.feature_order;
  check_partition(groups, order);

  auto test_accuracy = [&](const features::SplitSet& s) {
    const auto model = ml::fit_model(kind, s.train, config);
    return accuracy(ml::predict(model, s.test), labels_of(s.test));
  };

  AblationReport report;
  report.classifier = std::string(ml::kind_code(kind));
  report.baseline_accuracy = test_accuracy(splits);
  for (const auto& g : groups) {
    std::vector<std::string> kept;
    for (const auto& c : order) {
      if (std::find(g.columns.begin(), g.columns.end(), c) == g.columns.end()) kept.push_back(c);
    }
    AblationEntry e;
    e.group = g.name;
    e.baseline_accuracy = report.baseline_accuracy;
    if (kept.empty()) {
      // Nothing left to learn from: the model can only predict the prior.
      e.ablated_accuracy = majority_baseline(splits.test);
    } else {
      features::SplitSet reduced;
      reduced.seed = splits.seed;
      reduced.train = splits.train.select_columns(kept);
      reduced.val = splits.val.select_columns(kept);
      reduced.test = splits.test.select_columns(kept);
      e.ablated_accuracy = test_accuracy(reduced);
    }
    e.delta = e.baseline_accuracy - e.ablated_accuracy;
    report.entries.push_back(std::move(e));
  }
  std::stable_sort(report.entries.begin(), report.entries.end(),
                   [](const AblationEntry& a, const AblationEntry& b) { return a.delta > b.delta; });
  return report;
}

std::string AblationReport::to_text() const {
  std::ostringstream out;
  char line[160];
  out << "Ablation (" << classifier << "), baseline test accuracy "
      << format_percent(baseline_accuracy) << "%\n";
  std::snprintf(line, sizeof line, "%-20s %12s %10s\n", "Removed group", "Accuracy (%)", "Delta");
  out << line;
  out << std::string(20, '-') << ' ' << std::string(12, '-') << ' ' << std::string(10, '-') << '\n';
  for (const auto& e : entries) {
    std::snprintf(line, sizeof line, "%-20s %12s %+10.2f\n", e.group.c_str(),
                  format_percent(e.ablated_accuracy).c_str(),
                  std::round(e.delta * 10000.0) / 100.0);
    out << line;
  }
  return out.str();
}

std::string AblationReport::to_json() const {
  ordered_json doc;
  doc["classifier"] = classifier;
  doc["baseline_accuracy"] = baseline_accuracy;
  ordered_json groups = ordered_json::array();
  for (const auto& e : entries) {
    groups.push_back({{"group", e.group},
                      {"baseline_accuracy", e.baseline_accuracy},
                      {"ablated_accuracy", e.ablated_accuracy},
                      {"delta", e.delta}});
  }
  doc["groups"] = std::move(groups);
  return doc.dump(2) + "\n";
}

}  // namespace drgrade::eval
