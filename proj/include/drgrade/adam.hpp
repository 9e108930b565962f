#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace drgrade::ml {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;  // completed steps

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam step, in place.
void adam_update(std::span<double> params, std::span<const double> grad, AdamState& state,
                 const AdamConfig& cfg);

}  // namespace drgrade::ml
