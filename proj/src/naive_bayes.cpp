#include "drgrade/naive_bayes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "drgrade/error.hpp"

namespace drgrade::ml {

NaiveBayes NaiveBayes::fit(const Dataset& data, const NaiveBayesConfig& cfg, int n_classes) {
  if (data.size() == 0) throw Error(Errc::EmptyTable, "cannot fit naive Bayes on an empty table");
  if (!(cfg.var_smoothing >= 0.0)) throw Error(Errc::ConfigError, "var_smoothing must be >= 0");
  const std::size_t d = data.n_features;
  const auto k = static_cast<std::size_t>(n_classes);
  const double n = static_cast<double>(data.size());

  NaiveBayes nb;
  nb.n_features_ = d;
  nb.priors_.assign(k, 0.0);
  nb.means_.assign(k * d, 0.0);
  nb.variances_.assign(k * d, 0.0);

  std::vector<double> counts(k, 0.0);
  std::vector<double> overall_mean(d, 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int label = data.y[i];
    if (label < 0 || label >= n_classes) throw Error(Errc::OutOfRangeLabel, "label out of range");
    const auto c = static_cast<std::size_t>(label);
    counts[c] += 1.0;
    const auto row = data.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      nb.means_[c * d + j] += row[j];
      overall_mean[j] += row[j];
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    nb.priors_[c] = counts[c] / n;
    if (counts[c] > 0.0) {
      for (std::size_t j = 0; j < d; ++j) nb.means_[c * d + j] /= counts[c];
    }
  }
  for (double& m : overall_mean) m /= n;

  std::vector<double> overall_var(d, 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto c = static_cast<std::size_t>(data.y[i]);
    const auto row = data.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double dc = row[j] - nb.means_[c * d + j];
      nb.variances_[c * d + j] += dc * dc;
      const double dm = row[j] - overall_mean[j];
      overall_var[j] += dm * dm;
    }
  }
  double max_var = 0.0;
  for (double v : overall_var) max_var = std::max(max_var, v / n);
  nb.epsilon_ = cfg.var_smoothing * max_var;
  if (!(nb.epsilon_ > 0.0)) nb.epsilon_ = std::max(cfg.var_smoothing, 1e-300);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t j = 0; j < d; ++j) {
      auto& v = nb.variances_[c * d + j];
      v = (counts[c] > 0.0 ? v / counts[c] : 0.0) + nb.epsilon_;
    }
  }
  return nb;
}

std::vector<double> NaiveBayes::posterior(std::span<const double> x) const {
  if (x.size() != n_features_) throw Error(Errc::SchemaMismatch, "row width does not match the model");
  const std::size_t k = priors_.size();
  const std::size_t d = n_features_;
  std::vector<double> log_joint(k, -std::numeric_limits<double>::infinity());
  for (std::size_t c = 0; c < k; ++c) {
    if (!(priors_[c] > 0.0)) continue;
    double lj = std::log(priors_[c]);
    for (std::size_t j = 0; j < d; ++j) {
      const double var = variances_[c * d + j];
      const double diff = x[j] - means_[c * d + j];
      lj -= 0.5 * std::log(2.0 * std::numbers::pi * var) + diff * diff / (2.0 * var);
    }
    log_joint[c] = lj;
  }
  const double peak = *std::max_element(log_joint.begin(), log_joint.end());
  double sum = 0.0;
  std::vector<double> post(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    if (std::isinf(log_joint[c])) continue;
    post[c] = std::exp(log_joint[c] - peak);
    sum += post[c];
  }
  for (double& p : post) p /= sum;
  return post;
}

int NaiveBayes::predict(std::span<const double> x) const {
  const auto p = posterior(x);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

nlohmann::json NaiveBayes::to_json() const {
  return {{"n_features", n_features_}, {"priors", priors_}, {"means", means_},
          {"variances", variances_}, {"epsilon", epsilon_}};
}

NaiveBayes NaiveBayes::from_json(const nlohmann::json& j) {
  NaiveBayes nb;
  nb.n_features_ = j.at("n_features").get<std::size_t>();
  nb.priors_ = j.at("priors").get<std::vector<double>>();
  nb.means_ = j.at("means").get<std::vector<double>>();
  nb.variances_ = j.at("variances").get<std::vector<double>>();
  nb.epsilon_ = j.at("epsilon").get<double>();
  const auto expected = nb.priors_.size() * nb.n_features_;
  if (nb.means_.size() != expected || nb.variances_.size() != expected) {
    throw Error(Errc::ParseError, "naive Bayes parameter sizes are inconsistent");
  }
  return nb;
}

}  // namespace drgrade::ml
