#include "drgrade/logistic_regression.hpp"

#include <algorithm>
#include <cmath>

#include "drgrade/error.hpp"

namespace drgrade::ml {

void LogRegConfig::validate() const {
  if (!(l2 >= 0.0)) throw Error(Errc::ConfigError, "logreg l2 must be >= 0");
  if (iterations < 1) throw Error(Errc::ConfigError, "logreg iterations must be >= 1");
  if (!(learning_rate > 0.0)) throw Error(Errc::ConfigError, "logreg learning_rate must be > 0");
}

namespace {

void class_scores(std::span<const double> params, std::span<const double> x, std::size_t k,
                  std::vector<double>& out) {
  const std::size_t d = x.size();
  out.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    const double* w = params.data() + c * (d + 1);
    double s = w[d];
    for (std::size_t j = 0; j < d; ++j) s += w[j] * x[j];
    out[c] = s;
  }
}

}  // namespace

double LogisticRegression::loss_and_gradient(const Dataset& data, std::span<const double> params,
                                             std::span<double> grad, double l2, int n_classes) {
  const std::size_t d = data.n_features;
  const auto k = static_cast<std::size_t>(n_classes);
  const double n = static_cast<double>(data.size());
  if (params.size() != k * (d + 1)) throw Error(Errc::LengthMismatch, "logreg parameter size mismatch");
  const bool want_grad = !grad.empty();
  if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);

  std::vector<double> z;
  double loss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.row(i);
    const auto label = static_cast<std::size_t>(data.y[i]);
    class_scores(params, x, k, z);
    const double peak = *std::max_element(z.begin(), z.end());
    const double label_score = z[label] - peak;
    double sum = 0.0;
    for (double& v : z) {
      v = std::exp(v - peak);
      sum += v;
    }
    loss += std::log(sum) - label_score;
    if (!want_grad) continue;
    for (std::size_t c = 0; c < k; ++c) {
      const double delta = (z[c] / sum - (c == label ? 1.0 : 0.0)) / n;
      double* g = grad.data() + c * (d + 1);
      for (std::size_t j = 0; j < d; ++j) g[j] += delta * x[j];
      g[d] += delta;
    }
  }
  loss /= n;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t j = 0; j < d; ++j) {
      const double w = params[c * (d + 1) + j];
      loss += 0.5 * l2 * w * w;
      if (want_grad) grad[c * (d + 1) + j] += l2 * w;
    }
  }
  return loss;
}

LogisticRegression LogisticRegression::fit(const Dataset& data, const LogRegConfig& cfg,
                                           int n_classes) {
  cfg.validate();
  if (data.size() == 0) throw Error(Errc::EmptyTable, "cannot fit logistic regression on an empty table");
  for (int label : data.y) {
    if (label < 0 || label >= n_classes) throw Error(Errc::OutOfRangeLabel, "label out of range");
  }
  LogisticRegression model;
  model.n_features_ = data.n_features;
  model.n_classes_ = n_classes;
  model.params_.assign(static_cast<std::size_t>(n_classes) * (data.n_features + 1), 0.0);
  std::vector<double> grad(model.params_.size());
  for (int it = 0; it < cfg.iterations; ++it) {
    const double loss = loss_and_gradient(data, model.params_, grad, cfg.l2, n_classes);
    if (!std::isfinite(loss)) {
      throw Error(Errc::SolverDiverged, "logistic regression loss became non-finite at iteration " +
                                            std::to_string(it));
    }
    for (std::size_t p = 0; p < grad.size(); ++p) model.params_[p] -= cfg.learning_rate * grad[p];
  }
  return model;
}

std::vector<double> LogisticRegression::scores(std::span<const double> x) const {
  if (x.size() != n_features_) throw Error(Errc::SchemaMismatch, "row width does not match the model");
  std::vector<double> z;
  class_scores(params_, x, static_cast<std::size_t>(n_classes_), z);
  return z;
}

int LogisticRegression::predict(std::span<const double> x) const {
  const auto z = scores(x);
  return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

nlohmann::json LogisticRegression::to_json() const {
  return {{"n_features", n_features_}, {"n_classes", n_classes_}, {"params", params_}};
}

LogisticRegression LogisticRegression::from_json(const nlohmann::json& j) {
  LogisticRegression m;
  m.n_features_ = j.at("n_features").get<std::size_t>();
  m.n_classes_ = j.at("n_classes").get<int>();
  m.params_ = j.at("params").get<std::vector<double>>();
  if (m.params_.size() != static_cast<std::size_t>(m.n_classes_) * (m.n_features_ + 1)) {
    throw Error(Errc::ParseError, "logreg parameter size mismatch");
  }
  return m;
}

}  // namespace drgrade::ml
