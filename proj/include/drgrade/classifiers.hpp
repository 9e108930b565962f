#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "drgrade/adaboost.hpp"
#include "drgrade/decision_tree.hpp"
#include "drgrade/features.hpp"
#include "drgrade/knn.hpp"
#include "drgrade/logistic_regression.hpp"
#include "drgrade/mlp.hpp"
#include "drgrade/naive_bayes.hpp"
#include "drgrade/svm.hpp"

namespace drgrade::ml {

enum class ModelKind {
  MLP,
  DecisionTree,
  NaiveBayes,
  LogisticRegression,
  KNN,
  AdaBoost,
  SvmLinear,
  SvmPoly,
  SvmRbf,
};

inline constexpr std::array<ModelKind, 9> kAllModelKinds = {
    ModelKind::MLP,      ModelKind::DecisionTree, ModelKind::NaiveBayes,
    ModelKind::SvmPoly,  ModelKind::LogisticRegression, ModelKind::SvmLinear,
    ModelKind::SvmRbf,   ModelKind::KNN,          ModelKind::AdaBoost};

/// Short identifier used in file names and config ("mlp", "svm_rbf", ...).
std::string_view kind_code(ModelKind kind) noexcept;
/// Report label ("Neural Network", "SVM - RBF", ...).
std::string_view display_name(ModelKind kind) noexcept;
/// Accepts kind codes; throws ConfigError otherwise.
ModelKind parse_kind(std::string_view code);

struct ClassifierConfig {
  MlpConfig mlp;
  TreeConfig tree;
  NaiveBayesConfig naive_bayes;
  LogRegConfig logreg;
  KnnConfig knn;
  AdaBoostConfig adaboost;
  SvmConfig svm;

  /// Hyper-parameters relevant to `kind`, as stored in serialized models.
  nlohmann::ordered_json to_json(ModelKind kind) const;
};

using ModelState = std::variant<Mlp, DecisionTree, NaiveBayes, LogisticRegression, Knn, AdaBoost,
                                LinearSvm, KernelSvm>;

struct TrainedModel {
  ModelKind kind = ModelKind::MLP;
  ModelState state;
  std::vector<std::string> feature_order;
  std::optional<features::Scaler> scaler;
  int n_classes = features::kNumClasses;
  nlohmann::ordered_json config;
};

inline constexpr int kModelFormatVersion = 1;

TrainedModel mlp_fit(const features::FeatureTable& train, const MlpConfig& cfg);

/// Any kind except MLP; MLP is routed to mlp_fit by fit_model.
TrainedModel fit_classical(ModelKind kind, const features::FeatureTable& train,
                           const ClassifierConfig& cfg);

TrainedModel fit_model(ModelKind kind, const features::FeatureTable& train,
                       const ClassifierConfig& cfg);

/// Throws SchemaMismatch when `rows` uses a different column order.
std::vector<int> predict(const TrainedModel& model, const features::FeatureTable& rows);
int predict_row(const TrainedModel& model, std::span<const double> x);

/// {format_version, kind, params, feature_order, scaler, config}.
std::string serialize_model(const TrainedModel& model);
/// Rejects unknown format_version with UnsupportedFormat.
TrainedModel deserialize_model(std::string_view text);

void save_model(const std::filesystem::path& path, const TrainedModel& model);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace drgrade::ml
