#include "drgrade/dataset.hpp"

#include "drgrade/error.hpp"
#include "drgrade/features.hpp"

namespace drgrade::ml {

void Dataset::push_back(std::span<const double> features, int label) {
  if (y.empty() && n_features == 0) n_features = features.size();
  if (features.size() != n_features) {
    throw Error(Errc::SchemaMismatch, "row width does not match the dataset");
  }
  x.insert(x.end(), features.begin(), features.end());
  y.push_back(label);
}

Dataset to_dataset(const features::FeatureTable& table) {
  Dataset d;
  d.n_features = table.feature_order.size();
  d.x.reserve(table.rows.size() * d.n_features);
  d.y.reserve(table.rows.size());
  for (const auto& r : table.rows) d.push_back(r.values, r.label);
  return d;
}

}  // namespace drgrade::ml
