#pragma once

#include <cstdint>
#include <vector>

#include "drgrade/detections.hpp"

namespace drgrade::detect {

/// Maps an image's total confidence-weighted lesion area to a raw severity
/// grade: grade = number of thresholds the total reaches. Only instances that
/// survive exudate pruning contribute, so the grade is a function of the
/// features the classifiers see.
struct SeverityRule {
  /// Four ascending thresholds; empty means the 20/40/60/80 % quantiles of
  /// the generated totals (roughly balanced raw grades).
  std::vector<double> thresholds;
  double ex_prune_threshold = 0.65;
};

struct SynthOptions {
  int image_size = 1024;
  int max_instances_per_type = 128;
};

struct SynthResult {
  Manifest manifest;
  Detections detections;
  std::vector<double> thresholds;  // the thresholds actually applied
};

/// Reproducible fixture: a latent per-image severity drives Poisson lesion
/// counts; lesion areas are log-normal and confidences uniform on
/// [0.35, 1]. Every record satisfies the LesionInstance invariants.
SynthResult synth_detections(std::uint64_t seed, int n_images,
                             const SeverityRule& rule = {},
                             const SynthOptions& options = {});

/// Total weighted area of one image's instances under `rule`.
double rule_weighted_area(const Detections& image_instances, const SeverityRule& rule);

}  // namespace drgrade::detect
