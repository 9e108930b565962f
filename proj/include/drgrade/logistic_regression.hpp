#pragma once

#include <span>
#include <vector>

#include <json.hpp>

#include "drgrade/dataset.hpp"

namespace drgrade::ml {

struct LogRegConfig {
  double l2 = 1e-4;
  int iterations = 500;
  double learning_rate = 0.5;

  void validate() const;
};

/// Multinomial softmax regression fitted by full-batch gradient descent.
/// Parameters per class: d weights followed by the bias.
class LogisticRegression {
 public:
  static LogisticRegression fit(const Dataset& data, const LogRegConfig& cfg, int n_classes = 3);

  /// Mean cross-entropy + (l2 / 2) * ||W||^2 (biases unpenalized). Writes
  /// the gradient into `grad` when it is non-empty.
  static double loss_and_gradient(const Dataset& data, std::span<const double> params,
                                  std::span<double> grad, double l2, int n_classes = 3);

  std::vector<double> scores(std::span<const double> x) const;
  int predict(std::span<const double> x) const;
  std::span<const double> params() const noexcept { return params_; }

  nlohmann::json to_json() const;
  static LogisticRegression from_json(const nlohmann::json& j);

 private:
  std::size_t n_features_ = 0;
  int n_classes_ = 3;
  std::vector<double> params_;
};

}  // namespace drgrade::ml
