#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace drgrade::features {
struct FeatureTable;
}

namespace drgrade::ml {

/// Dense row-major design matrix with integer labels.
struct Dataset {
  std::size_t n_features = 0;
  std::vector<double> x;
  std::vector<int> y;

  std::size_t size() const noexcept { return y.size(); }
  std::span<const double> row(std::size_t i) const {
    return {x.data() + i * n_features, n_features};
  }
  void push_back(std::span<const double> features, int label);
};

Dataset to_dataset(const features::FeatureTable& table);

}  // namespace drgrade::ml
