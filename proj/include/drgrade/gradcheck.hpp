#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace drgrade::ml {

/// Loss at `params`; when `grad` is non-null it receives the analytic
/// gradient (same length as params).
using LossFunction = std::function<double(std::span<const double> params, std::span<double> grad)>;

struct GradientCheckOptions {
  std::size_t max_params = 200;
  double step = 1e-5;
  std::uint64_t seed = 0;
};

/// Compares the analytic gradient with central finite differences on up to
/// `max_params` randomly chosen coordinates. Returns
/// max |g_a - g_fd| / max(|g_a| + |g_fd|, 1e-8).
double finite_difference_check(const LossFunction& loss, std::vector<double> params,
                               const GradientCheckOptions& options = {});

}  // namespace drgrade::ml
