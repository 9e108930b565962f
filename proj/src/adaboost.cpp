#include "drgrade/adaboost.hpp"

#include <algorithm>
#include <cmath>

#include "drgrade/error.hpp"

namespace drgrade::ml {

AdaBoost AdaBoost::fit(const Dataset& data, const AdaBoostConfig& cfg, int n_classes) {
  if (cfg.rounds < 1) throw Error(Errc::ConfigError, "adaboost rounds must be >= 1");
  if (data.size() == 0) throw Error(Errc::EmptyTable, "cannot fit adaboost on an empty table");
  const std::size_t n = data.size();
  const double k = static_cast<double>(n_classes);
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  const TreeConfig stump{1, 1};

  AdaBoost model;
  model.n_classes_ = n_classes;
  std::vector<bool> miss(n);
  for (int round = 0; round < cfg.rounds; ++round) {
    auto tree = DecisionTree::fit(data, w, stump, n_classes);
    double err = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      miss[i] = tree.predict(data.row(i)) != data.y[i];
      if (miss[i]) err += w[i];
      total += w[i];
    }
    err /= total;
    if (err <= 0.0) {
      model.stumps_.push_back(std::move(tree));
      model.alphas_.push_back(1.0);
      break;
    }
    if (err >= 1.0 - 1.0 / k) {
      if (model.stumps_.empty()) {
        model.stumps_.push_back(std::move(tree));
        model.alphas_.push_back(1.0);
      }
      break;
    }
    const double alpha = std::log((1.0 - err) / err) + std::log(k - 1.0);
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (miss[i]) w[i] *= std::exp(alpha);
      norm += w[i];
    }
    for (double& wi : w) wi /= norm;
    model.stumps_.push_back(std::move(tree));
    model.alphas_.push_back(alpha);
  }
  return model;
}

int AdaBoost::predict(std::span<const double> x, std::size_t rounds) const {
  std::vector<double> score(static_cast<std::size_t>(n_classes_), 0.0);
  const std::size_t m = std::min(rounds, stumps_.size());
  for (std::size_t r = 0; r < m; ++r) {
    score[static_cast<std::size_t>(stumps_[r].predict(x))] += alphas_[r];
  }
  return static_cast<int>(std::max_element(score.begin(), score.end()) - score.begin());
}

nlohmann::json AdaBoost::to_json() const {
  nlohmann::json stumps = nlohmann::json::array();
  for (const auto& s : stumps_) stumps.push_back(s.to_json());
  return {{"n_classes", n_classes_}, {"alphas", alphas_}, {"stumps", stumps}};
}

AdaBoost AdaBoost::from_json(const nlohmann::json& j) {
  AdaBoost m;
  m.n_classes_ = j.at("n_classes").get<int>();
  m.alphas_ = j.at("alphas").get<std::vector<double>>();
  for (const auto& s : j.at("stumps")) m.stumps_.push_back(DecisionTree::from_json(s));
  if (m.alphas_.size() != m.stumps_.size() || m.stumps_.empty()) {
    throw Error(Errc::ParseError, "adaboost stage counts are inconsistent");
  }
  return m;
}

}  // namespace drgrade::ml
