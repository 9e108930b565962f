#include "drgrade/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "drgrade/error.hpp"
#include "drgrade/random.hpp"

namespace drgrade::ml {

double Kernel::operator()(std::span<const double> a, std::span<const double> b) const {
  switch (kind) {
    case KernelKind::Linear: return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
    case KernelKind::Polynomial: {
      const double dot = std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
      return std::pow(gamma * dot + coef0, degree);
    }
    case KernelKind::Rbf: {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
      return std::exp(-gamma * s);
    }
  }
  return 0.0;
}

void SvmConfig::validate() const {
  if (!(c > 0.0)) throw Error(Errc::ConfigError, "svm C must be > 0");
  if (degree < 1) throw Error(Errc::ConfigError, "svm degree must be >= 1");
  if (!(tol > 0.0)) throw Error(Errc::ConfigError, "svm tol must be > 0");
  if (max_passes < 1) throw Error(Errc::ConfigError, "svm max_passes must be >= 1");
  if (linear_epochs < 1) throw Error(Errc::ConfigError, "svm linear_epochs must be >= 1");
}

SmoSolution solve_smo(std::span<const double> gram, std::span<const double> y,
                      const SmoOptions& options) {
  const std::size_t n = y.size();
  if (gram.size() != n * n) throw Error(Errc::LengthMismatch, "gram matrix must be n x n");
  const double c = options.c;
  constexpr double kTau = 1e-12;
  auto k = [&](std::size_t i, std::size_t j) { return gram[i * n + j]; };

  SmoSolution sol;
  sol.alpha.assign(n, 0.0);
  std::vector<double> grad(n, -1.0);  // Q alpha - e
  auto& a = sol.alpha;

  const auto in_up = [&](std::size_t t) {
    return (y[t] > 0 && a[t] < c) || (y[t] < 0 && a[t] > 0);
  };
  const auto in_low = [&](std::size_t t) {
    return (y[t] > 0 && a[t] > 0) || (y[t] < 0 && a[t] < c);
  };

  while (sol.iterations < options.max_iterations) {
    std::size_t i = n;
    std::size_t j = n;
    double up = -std::numeric_limits<double>::infinity();
    double low = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * grad[t];
      if (in_up(t) && v > up) {
        up = v;
        i = t;
      }
      if (in_low(t) && v < low) {
        low = v;
        j = t;
      }
    }
    if (i == n || j == n || up - low < options.tol) {
      sol.converged = true;
      break;
    }
    ++sol.iterations;

    double eta = k(i, i) + k(j, j) - 2.0 * k(i, j);
    if (eta <= 0.0) eta = kTau;
    double step = (up - low) / eta;
    step = std::min(step, y[i] > 0 ? c - a[i] : a[i]);
    step = std::min(step, y[j] > 0 ? a[j] : c - a[j]);

    const double d_i = y[i] * step;
    const double d_j = -y[j] * step;
    a[i] = std::clamp(a[i] + d_i, 0.0, c);
    a[j] = std::clamp(a[j] + d_j, 0.0, c);
    for (std::size_t t = 0; t < n; ++t) {
      grad[t] += y[t] * (y[i] * k(t, i) * d_i + y[j] * k(t, j) * d_j);
    }
  }

  // Bias from free vectors, else the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (a[t] >= c) {
      if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (a[t] <= 0.0) {
      if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      free_sum += yg;
    }
  }
  const double rho = n_free > 0 ? free_sum / static_cast<double>(n_free) : (ub + lb) / 2.0;
  sol.bias = -rho;
  return sol;
}

namespace {

Kernel resolve_kernel(Kernel kernel, const SvmConfig& cfg, std::size_t n_features) {
  if (kernel.kind != KernelKind::Linear) {
    kernel.gamma = cfg.gamma > 0.0 ? cfg.gamma : 1.0 / static_cast<double>(std::max<std::size_t>(n_features, 1));
  }
  kernel.coef0 = cfg.coef0;
  kernel.degree = cfg.degree;
  return kernel;
}

void check_labels(const Dataset& data, int n_classes) {
  if (data.size() == 0) throw Error(Errc::EmptyTable, "cannot fit an SVM on an empty table");
  for (int label : data.y) {
    if (label < 0 || label >= n_classes) throw Error(Errc::OutOfRangeLabel, "label out of range");
  }
}

int argmax_lowest(const std::vector<double>& v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

KernelSvm KernelSvm::fit(const Dataset& data, const Kernel& kernel, const SvmConfig& cfg,
                         int n_classes) {
  cfg.validate();
  check_labels(data, n_classes);
  const std::size_t n = data.size();
  const std::size_t d = data.n_features;

  KernelSvm model;
  model.kernel_ = resolve_kernel(kernel, cfg, d);
  model.n_features_ = d;

  std::vector<double> gram(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = model.kernel_(data.row(i), data.row(j));
      gram[i * n + j] = v;
      gram[j * n + i] = v;
    }
  }

  // A pass is one pairwise update per training row.
  const SmoOptions options{cfg.c, cfg.tol,
                           static_cast<std::size_t>(cfg.max_passes) * std::max<std::size_t>(n, 1000) * 10};
  std::vector<double> y(n);
  for (int cls = 0; cls < n_classes; ++cls) {
    std::size_t positives = 0;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = data.y[i] == cls ? 1.0 : -1.0;
      positives += data.y[i] == cls ? 1 : 0;
    }
    Binary machine;
    if (positives == 0 || positives == n) {
      machine.bias = positives == 0 ? -1.0 : 1.0;
      model.machines_.push_back(std::move(machine));
      continue;
    }
    const auto sol = solve_smo(gram, y, options);
    model.converged_ = model.converged_ && sol.converged;
    for (std::size_t i = 0; i < n; ++i) {
      if (sol.alpha[i] <= 0.0) continue;
      const auto r = data.row(i);
      machine.support.insert(machine.support.end(), r.begin(), r.end());
      machine.coef.push_back(sol.alpha[i] * y[i]);
    }
    machine.bias = sol.bias;
    if (!std::isfinite(machine.bias)) {
      throw Error(Errc::SolverDiverged, "SMO produced a non-finite bias for class " + std::to_string(cls));
    }
    model.machines_.push_back(std::move(machine));
  }
  return model;
}

std::vector<double> KernelSvm::decision(std::span<const double> x) const {
  if (x.size() != n_features_) throw Error(Errc::SchemaMismatch, "row width does not match the model");
  std::vector<double> out;
  out.reserve(machines_.size());
  for (const auto& m : machines_) {
    double f = m.bias;
    for (std::size_t s = 0; s < m.coef.size(); ++s) {
      f += m.coef[s] * kernel_(std::span<const double>(m.support.data() + s * n_features_, n_features_), x);
    }
    out.push_back(f);
  }
  return out;
}

int KernelSvm::predict(std::span<const double> x) const { return argmax_lowest(decision(x)); }

namespace {

std::string_view kernel_name(KernelKind k) {
  switch (k) {
    case KernelKind::Linear: return "linear";
    case KernelKind::Polynomial: return "polynomial";
    case KernelKind::Rbf: return "rbf";
  }
  return "rbf";
}

KernelKind kernel_from_name(const std::string& s) {
  if (s == "linear") return KernelKind::Linear;
  if (s == "polynomial") return KernelKind::Polynomial;
  if (s == "rbf") return KernelKind::Rbf;
  throw Error(Errc::ParseError, "unknown kernel " + s);
}

}  // namespace

nlohmann::json KernelSvm::to_json() const {
  nlohmann::json machines = nlohmann::json::array();
  for (const auto& m : machines_) {
    machines.push_back({{"support", m.support}, {"coef", m.coef}, {"bias", m.bias}});
  }
  return {{"kernel", {{"kind", kernel_name(kernel_.kind)}, {"gamma", kernel_.gamma},
                      {"coef0", kernel_.coef0}, {"degree", kernel_.degree}}},
          {"n_features", n_features_},
          {"converged", converged_},
          {"machines", machines}};
}

KernelSvm KernelSvm::from_json(const nlohmann::json& j) {
  KernelSvm m;
  const auto& k = j.at("kernel");
  m.kernel_.kind = kernel_from_name(k.at("kind").get<std::string>());
  m.kernel_.gamma = k.at("gamma").get<double>();
  m.kernel_.coef0 = k.at("coef0").get<double>();
  m.kernel_.degree = k.at("degree").get<int>();
  m.n_features_ = j.at("n_features").get<std::size_t>();
  m.converged_ = j.at("converged").get<bool>();
  for (const auto& mj : j.at("machines")) {
    Binary b;
    b.support = mj.at("support").get<std::vector<double>>();
    b.coef = mj.at("coef").get<std::vector<double>>();
    b.bias = mj.at("bias").get<double>();
    if (b.support.size() != b.coef.size() * m.n_features_) {
      throw Error(Errc::ParseError, "svm support vector block is inconsistent");
    }
    m.machines_.push_back(std::move(b));
  }
  return m;
}

LinearSvm LinearSvm::fit(const Dataset& data, const SvmConfig& cfg, int n_classes) {
  cfg.validate();
  check_labels(data, n_classes);
  const std::size_t n = data.size();
  const std::size_t d = data.n_features;
  const double lambda = 1.0 / (cfg.c * static_cast<double>(n));

  LinearSvm model;
  model.n_features_ = d;
  model.n_classes_ = n_classes;
  model.weights_.assign(static_cast<std::size_t>(n_classes) * (d + 1), 0.0);

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int cls = 0; cls < n_classes; ++cls) {
    double* w = model.weights_.data() + static_cast<std::size_t>(cls) * (d + 1);
    const bool present = std::find(data.y.begin(), data.y.end(), cls) != data.y.end();
    if (!present) {
      w[d] = -1.0;
      continue;
    }
    // Scaling w lazily: w_true = scale * w.
    double scale = 1.0;
    std::uint64_t t = 0;
    for (int epoch = 0; epoch < cfg.linear_epochs; ++epoch) {
      rng.shuffle(std::span<std::size_t>(order));
      for (const auto i : order) {
        ++t;
        const double eta = 1.0 / (lambda * static_cast<double>(t));
        const double label = data.y[i] == cls ? 1.0 : -1.0;
        const auto x = data.row(i);
        double margin = w[d];
        for (std::size_t k = 0; k < d; ++k) margin += w[k] * x[k];
        margin *= scale * label;
        const double shrink = 1.0 - eta * lambda;
        if (shrink <= 0.0) {
          std::fill(w, w + d + 1, 0.0);
          scale = 1.0;
        } else {
          scale *= shrink;
        }
        if (margin < 1.0) {
          const double step = eta * label / scale;
          for (std::size_t k = 0; k < d; ++k) w[k] += step * x[k];
          w[d] += step;
        }
        if (scale < 1e-9) {
          for (std::size_t k = 0; k <= d; ++k) w[k] *= scale;
          scale = 1.0;
        }
      }
    }
    for (std::size_t k = 0; k <= d; ++k) {
      w[k] *= scale;
      if (!std::isfinite(w[k])) {
        throw Error(Errc::SolverDiverged, "linear SVM weights became non-finite for class " +
                                              std::to_string(cls));
      }
    }
  }
  return model;
}

std::vector<double> LinearSvm::decision(std::span<const double> x) const {
  if (x.size() != n_features_) throw Error(Errc::SchemaMismatch, "row width does not match the model");
  std::vector<double> out(static_cast<std::size_t>(n_classes_));
  const std::size_t d = n_features_;
  for (std::size_t c = 0; c < out.size(); ++c) {
    const double* w = weights_.data() + c * (d + 1);
    double s = w[d];
    for (std::size_t k = 0; k < d; ++k) s += w[k] * x[k];
    out[c] = s;
  }
  return out;
}

int LinearSvm::predict(std::span<const double> x) const { return argmax_lowest(decision(x)); }

nlohmann::json LinearSvm::to_json() const {
  return {{"n_features", n_features_}, {"n_classes", n_classes_}, {"weights", weights_}};
}

LinearSvm LinearSvm::from_json(const nlohmann::json& j) {
  LinearSvm m;
  m.n_features_ = j.at("n_features").get<std::size_t>();
  m.n_classes_ = j.at("n_classes").get<int>();
  m.weights_ = j.at("weights").get<std::vector<double>>();
  if (m.weights_.size() != static_cast<std::size_t>(m.n_classes_) * (m.n_features_ + 1)) {
    throw Error(Errc::ParseError, "linear SVM weight size mismatch");
  }
  return m;
}

}  // namespace drgrade::ml
