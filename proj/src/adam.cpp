#include "drgrade/adam.hpp"

#include <cmath>

#include "drgrade/error.hpp"

namespace drgrade::ml {

void adam_update(std::span<double> params, std::span<const double> grad, AdamState& state,
                 const AdamConfig& cfg) {
  if (grad.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw Error(Errc::LengthMismatch, "Adam parameter, gradient and state sizes differ");
  }
  const auto step = static_cast<double>(++state.t);
  const double correct1 = 1.0 - std::pow(cfg.beta1, step);
  const double correct2 = 1.0 - std::pow(cfg.beta2, step);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m[i] / correct1;
    const double v_hat = state.v[i] / correct2;
    params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

}  // namespace drgrade::ml
