#pragma once

#include <span>
#include <vector>

#include <json.hpp>

#include "drgrade/dataset.hpp"

namespace drgrade::ml {

struct NaiveBayesConfig {
  /// Added to every per-class variance, relative to the largest feature
  /// variance of the training set.
  double var_smoothing = 1e-9;
};

/// Gaussian naive Bayes with empirical class priors and population
/// variances.
class NaiveBayes {
 public:
  static NaiveBayes fit(const Dataset& data, const NaiveBayesConfig& cfg, int n_classes = 3);

  std::vector<double> posterior(std::span<const double> x) const;
  int predict(std::span<const double> x) const;

  const std::vector<double>& priors() const noexcept { return priors_; }
  double epsilon() const noexcept { return epsilon_; }

  nlohmann::json to_json() const;
  static NaiveBayes from_json(const nlohmann::json& j);

 private:
  std::size_t n_features_ = 0;
  std::vector<double> priors_;
  std::vector<double> means_;      // class-major
  std::vector<double> variances_;  // smoothed
  double epsilon_ = 0.0;
};

}  // namespace drgrade::ml
