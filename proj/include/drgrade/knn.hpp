#pragma once

#include <span>

#include <json.hpp>

#include "drgrade/dataset.hpp"

namespace drgrade::ml {

struct KnnConfig {
  int k = 5;
};

/// Euclidean k-nearest-neighbour vote. Equal distances are broken by
/// training order, vote ties by the smallest label.
class Knn {
 public:
  static Knn fit(const Dataset& data, const KnnConfig& cfg, int n_classes = 3);
  int predict(std::span<const double> x) const;

  nlohmann::json to_json() const;
  static Knn from_json(const nlohmann::json& j);

 private:
  Dataset train_;
  int k_ = 5;
  int n_classes_ = 3;
};

}  // namespace drgrade::ml
