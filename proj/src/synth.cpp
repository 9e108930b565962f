#include "drgrade/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "drgrade/error.hpp"
#include "drgrade/random.hpp"

namespace drgrade::detect {

namespace {

double round_to(double v, double scale) { return std::round(v * scale) / scale; }

LesionInstance make_lesion(Rng& rng, const std::string& id, Eye eye, LesionType type,
                           int image_size) {
  LesionInstance inst;
  inst.image_id = id;
  inst.eye = eye;
  inst.lesion_type = type;
  inst.confidence = round_to(rng.uniform(kDetectorConfidenceFloor, 1.0), 1e4);
  inst.confidence = std::clamp(inst.confidence, kDetectorConfidenceFloor, 1.0);

  const double log_mean = type == LesionType::EX ? std::log(300.0) : std::log(15.0);
  const double log_sd = type == LesionType::EX ? 0.7 : 0.5;
  double area = std::max(2.0, std::round(std::exp(rng.normal(log_mean, log_sd))));

  // Uniform position inside the fundus disk.
  const double half = image_size / 2.0;
  const double r = 0.45 * image_size * std::sqrt(rng.uniform());
  const double theta = 2.0 * std::numbers::pi * rng.uniform();
  const double cx = half + r * std::cos(theta);
  const double cy = half + r * std::sin(theta);

  const double aspect = rng.uniform(0.7, 1.4);
  const double fill = rng.uniform(0.55, 0.85);
  const double box_area = area / fill;
  const double w = std::sqrt(box_area * aspect);
  const double h = box_area / w;
  inst.bbox = {round_to(cx - w / 2.0, 100.0), round_to(cy - h / 2.0, 100.0),
               round_to(cx + w / 2.0, 100.0), round_to(cy + h / 2.0, 100.0)};
  inst.center = {round_to(0.5 * (inst.bbox[0] + inst.bbox[2]), 1000.0),
                 round_to(0.5 * (inst.bbox[1] + inst.bbox[3]), 1000.0)};
  const double bbox_area = (inst.bbox[2] - inst.bbox[0]) * (inst.bbox[3] - inst.bbox[1]);
  inst.mask_area = std::min(area, std::floor(bbox_area));
  return inst;
}

}  // namespace

double rule_weighted_area(const Detections& image_instances, const SeverityRule& rule) {
  double total = 0.0;
  for (const auto& inst : image_instances) {
    if (inst.lesion_type == LesionType::EX && inst.confidence < rule.ex_prune_threshold) continue;
    total += inst.confidence * inst.mask_area;
  }
  return total;
}

SynthResult synth_detections(std::uint64_t seed, int n_images, const SeverityRule& rule,
                             const SynthOptions& options) {
  if (n_images < 1) throw Error(Errc::InvalidArgument, "n_images must be >= 1");
  if (!rule.thresholds.empty()) {
    if (rule.thresholds.size() != 4 ||
        !std::is_sorted(rule.thresholds.begin(), rule.thresholds.end())) {
      throw Error(Errc::InvalidArgument, "severity rule needs 4 ascending thresholds");
    }
  }

  Rng rng(seed);
  std::vector<Detections> per_image(static_cast<std::size_t>(n_images));
  SynthResult out;
  out.manifest.reserve(per_image.size());
  std::vector<double> totals(per_image.size());

  for (int i = 0; i < n_images; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "img_%05d", i);
    const Eye eye = rng.uniform() < 0.5 ? Eye::Left : Eye::Right;
    const double latent = rng.uniform();
    const int n_ex = std::min(rng.poisson(0.3 + 10.0 * latent), options.max_instances_per_type);
    const int n_ma = std::min(rng.poisson(0.5 + 15.0 * latent), options.max_instances_per_type);

    auto& bucket = per_image[static_cast<std::size_t>(i)];
    for (int k = 0; k < n_ex; ++k) {
      bucket.push_back(make_lesion(rng, id, eye, LesionType::EX, options.image_size));
    }
    for (int k = 0; k < n_ma; ++k) {
      bucket.push_back(make_lesion(rng, id, eye, LesionType::MA, options.image_size));
    }
    totals[static_cast<std::size_t>(i)] = rule_weighted_area(bucket, rule);
    out.manifest.push_back({id, eye, 0});
  }

  out.thresholds = rule.thresholds;
  if (out.thresholds.empty()) {
    std::vector<double> sorted = totals;
    std::sort(sorted.begin(), sorted.end());
    for (int q = 1; q <= 4; ++q) {
      const auto idx = static_cast<std::size_t>(q) * sorted.size() / 5;
      out.thresholds.push_back(sorted[std::min(idx, sorted.size() - 1)]);
    }
  }

  for (std::size_t i = 0; i < per_image.size(); ++i) {
    const auto grade = static_cast<int>(
        std::count_if(out.thresholds.begin(), out.thresholds.end(),
                      [&](double t) { return totals[i] >= t; }));
    out.manifest[i].severity_raw = grade;
    for (auto& inst : per_image[i]) {
      inst.severity_raw = grade;
      out.detections.push_back(std::move(inst));
    }
  }
  return out;
}

}  // namespace drgrade::detect
