#pragma once

#include <span>
#include <vector>

#include <json.hpp>

#include "drgrade/dataset.hpp"
#include "drgrade/decision_tree.hpp"

namespace drgrade::ml {

struct AdaBoostConfig {
  int rounds = 50;
};

/// Multi-class SAMME boosting over depth-1 weighted-Gini stumps. Stops early
/// when a stump is perfect or no better than chance.
class AdaBoost {
 public:
  static AdaBoost fit(const Dataset& data, const AdaBoostConfig& cfg, int n_classes = 3);

  int predict(std::span<const double> x) const { return predict(x, stumps_.size()); }
  /// Prediction using only the first `rounds` stumps.
  int predict(std::span<const double> x, std::size_t rounds) const;
  std::size_t rounds() const noexcept { return stumps_.size(); }
  const std::vector<double>& stage_weights() const noexcept { return alphas_; }

  nlohmann::json to_json() const;
  static AdaBoost from_json(const nlohmann::json& j);

 private:
  int n_classes_ = 3;
  std::vector<DecisionTree> stumps_;
  std::vector<double> alphas_;
};

}  // namespace drgrade::ml
