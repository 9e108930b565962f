#include "drgrade/knn.hpp"

#include <algorithm>
#include <numeric>
#include <utility>

#include "drgrade/error.hpp"

namespace drgrade::ml {

Knn Knn::fit(const Dataset& data, const KnnConfig& cfg, int n_classes) {
  if (cfg.k < 1) throw Error(Errc::ConfigError, "knn k must be >= 1");
  if (data.size() == 0) throw Error(Errc::EmptyTable, "cannot fit knn on an empty table");
  for (int label : data.y) {
    if (label < 0 || label >= n_classes) throw Error(Errc::OutOfRangeLabel, "label out of range");
  }
  Knn m;
  m.train_ = data;
  m.k_ = cfg.k;
  m.n_classes_ = n_classes;
  return m;
}

int Knn::predict(std::span<const double> x) const {
  if (x.size() != train_.n_features) throw Error(Errc::SchemaMismatch, "row width does not match the model");
  const std::size_t n = train_.size();
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = train_.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) s += (r[j] - x[j]) * (r[j] - x[j]);
    dist[i] = {s, i};
  }
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(k_), n);
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  std::vector<int> votes(static_cast<std::size_t>(n_classes_), 0);
  for (std::size_t i = 0; i < k; ++i) ++votes[static_cast<std::size_t>(train_.y[dist[i].second])];
  return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

nlohmann::json Knn::to_json() const {
  return {{"k", k_}, {"n_classes", n_classes_}, {"n_features", train_.n_features},
          {"x", train_.x}, {"y", train_.y}};
}

Knn Knn::from_json(const nlohmann::json& j) {
  Knn m;
  m.k_ = j.at("k").get<int>();
  m.n_classes_ = j.at("n_classes").get<int>();
  m.train_.n_features = j.at("n_features").get<std::size_t>();
  m.train_.x = j.at("x").get<std::vector<double>>();
  m.train_.y = j.at("y").get<std::vector<int>>();
  if (m.train_.x.size() != m.train_.y.size() * m.train_.n_features || m.train_.y.empty()) {
    throw Error(Errc::ParseError, "knn training matrix is inconsistent");
  }
  return m;
}

}  // namespace drgrade::ml
