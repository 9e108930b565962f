#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "drgrade/dataset.hpp"

namespace drgrade::ml {

enum class KernelKind { Linear, Polynomial, Rbf };

struct Kernel {
  KernelKind kind = KernelKind::Rbf;
  double gamma = 1.0;
  double coef0 = 1.0;
  int degree = 3;

  double operator()(std::span<const double> a, std::span<const double> b) const;
};

struct SvmConfig {
  double c = 1.0;
  int degree = 3;
  double coef0 = 1.0;
  double gamma = 0.0;  // <= 0 means 1 / n_features
  double tol = 1e-3;
  int max_passes = 10;
  int linear_epochs = 20;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SmoOptions {
  double c = 1.0;
  double tol = 1e-3;
  std::size_t max_iterations = 100000;
};

struct SmoSolution {
  std::vector<double> alpha;
  double bias = 0.0;  // decision f(x) = sum alpha_i y_i K(x_i, x) + bias
  std::size_t iterations = 0;
  bool converged = false;
};

/// Soft-margin binary dual: min 1/2 a'Qa - e'a, 0 <= a <= C, y'a = 0, with
/// Q_ij = y_i y_j K_ij. Pairwise updates on the maximal violating pair
/// until the KKT gap drops below `tol`. `gram` is n x n row-major; labels
/// are +1 / -1.
SmoSolution solve_smo(std::span<const double> gram, std::span<const double> y,
                      const SmoOptions& options);

/// One-vs-rest kernel SVM; every binary problem is solved by solve_smo.
class KernelSvm {
 public:
  static KernelSvm fit(const Dataset& data, const Kernel& kernel, const SvmConfig& cfg,
                       int n_classes = 3);

  std::vector<double> decision(std::span<const double> x) const;
  int predict(std::span<const double> x) const;
  const Kernel& kernel() const noexcept { return kernel_; }
  bool converged() const noexcept { return converged_; }

  nlohmann::json to_json() const;
  static KernelSvm from_json(const nlohmann::json& j);

 private:
  struct Binary {
    std::vector<double> support;  // row-major support vectors
    std::vector<double> coef;     // alpha_i * y_i
    double bias = 0.0;
  };

  Kernel kernel_;
  std::size_t n_features_ = 0;
  std::vector<Binary> machines_;
  bool converged_ = true;
};

/// One-vs-rest linear SVM, hinge loss with L2 penalty lambda = 1 / (C n),
/// trained by seeded stochastic subgradient descent (Pegasos steps). The
/// bias is an extra constant input.
class LinearSvm {
 public:
  static LinearSvm fit(const Dataset& data, const SvmConfig& cfg, int n_classes = 3);

  std::vector<double> decision(std::span<const double> x) const;
  int predict(std::span<const double> x) const;

  nlohmann::json to_json() const;
  static LinearSvm from_json(const nlohmann::json& j);

 private:
  std::size_t n_features_ = 0;
  int n_classes_ = 3;
  std::vector<double> weights_;  // per class: d weights then the bias
};

}  // namespace drgrade::ml
