#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "drgrade/adam.hpp"
#include "drgrade/dataset.hpp"

namespace drgrade::ml {

struct MlpConfig {
  std::vector<int> hidden_sizes{75, 75};
  double learning_rate = 1e-3;
  int epochs = 100;
  int batch_size = 32;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
  AdamConfig adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_epsilon}; }
};

/// Fully connected network: rectifier hidden layers, softmax output,
/// cross-entropy loss. Parameters live in one flat vector, per layer the
/// weights (out x in, row-major) followed by the biases.
class Mlp {
 public:
  Mlp() = default;
  /// `layer_sizes` = {inputs, hidden..., outputs}; all parameters zero.
  explicit Mlp(std::vector<int> layer_sizes);

  /// Uniform fan-in initialization U(-sqrt(6/fan_in), +sqrt(6/fan_in)) for
  /// weights, zero biases.
  static Mlp initialized(std::vector<int> layer_sizes, std::uint64_t seed);

  const std::vector<int>& layer_sizes() const noexcept { return sizes_; }
  std::size_t num_layers() const noexcept { return sizes_.size() - 1; }
  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }
  std::size_t weight_offset(std::size_t layer) const { return weight_offsets_.at(layer); }
  std::size_t bias_offset(std::size_t layer) const { return bias_offsets_.at(layer); }

  std::vector<double> logits(std::span<const double> x) const;
  std::vector<double> probabilities(std::span<const double> x) const;
  int predict(std::span<const double> x) const;

  /// Summed cross-entropy over `batch` (indices into `data`).
  double loss(const Dataset& data, std::span<const std::size_t> batch) const;

  /// Summed loss; `grad` (size of params) is overwritten with its gradient.
  double loss_and_gradient(const Dataset& data, std::span<const std::size_t> batch,
                           std::span<double> grad) const;

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& j);

 private:
  void layout();

  std::vector<int> sizes_;
  std::vector<double> params_;
  std::vector<std::size_t> weight_offsets_;
  std::vector<std::size_t> bias_offsets_;
};

/// Mini-batch Adam on the mean batch loss. Throws NonFiniteLoss.
Mlp train_mlp(const Dataset& data, const MlpConfig& cfg);

/// Backprop vs central differences (h = 1e-5) on <= 200 random parameters.
double mlp_gradient_check(const Mlp& model, const Dataset& data,
                          std::span<const std::size_t> batch, std::uint64_t seed = 0);

/// Index of the largest value, lowest index on ties.
std::size_t argmax(std::span<const double> values) noexcept;

}  // namespace drgrade::ml
