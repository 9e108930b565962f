#pragma once

#include <span>
#include <vector>

#include <json.hpp>

#include "drgrade/dataset.hpp"

namespace drgrade::ml {

struct TreeConfig {
  int max_depth = 10;
  int min_leaf = 1;

  void validate() const;
};

/// CART classifier with (optionally weighted) Gini impurity. Splits test
/// x[feature] <= threshold; thresholds are midpoints between consecutive
/// distinct values. Ties go to the lowest feature index, then the lowest
/// threshold.
class DecisionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int label = 0;
  };

  static DecisionTree fit(const Dataset& data, const TreeConfig& cfg, int n_classes = 3);
  static DecisionTree fit(const Dataset& data, std::span<const double> weights,
                          const TreeConfig& cfg, int n_classes = 3);

  int predict(std::span<const double> x) const;
  int depth() const;
  const std::vector<Node>& nodes() const noexcept { return nodes_; }

  nlohmann::json to_json() const;
  static DecisionTree from_json(const nlohmann::json& j);

 private:
  std::vector<Node> nodes_;
};

}  // namespace drgrade::ml
