#include "drgrade/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "drgrade/random.hpp"

namespace drgrade::ml {

double finite_difference_check(const LossFunction& loss, std::vector<double> params,
                               const GradientCheckOptions& options) {
  std::vector<double> analytic(params.size(), 0.0);
  loss(params, analytic);

  std::vector<std::size_t> coords(params.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  Rng rng(options.seed);
  rng.shuffle(std::span<std::size_t>(coords));
  coords.resize(std::min(coords.size(), options.max_params));

  double worst = 0.0;
  for (const auto i : coords) {
    const double saved = params[i];
    params[i] = saved + options.step;
    const double up = loss(params, {});
    params[i] = saved - options.step;
    const double down = loss(params, {});
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * options.step);
    const double denom = std::max(std::abs(analytic[i]) + std::abs(numeric), 1e-8);
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace drgrade::ml
