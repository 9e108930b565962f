#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "drgrade/classifiers.hpp"
#include "drgrade/features.hpp"
#include "drgrade/imageprep.hpp"

namespace drgrade::cli {

// --- key = value documents --------------------------------------------------

using Value = std::variant<bool, std::int64_t, double, std::string, std::vector<std::int64_t>,
                           std::vector<std::string>>;

struct Entry {
  std::string key;
  Value value;
  std::size_t line = 0;
};

struct Section {
  std::string name;
  std::vector<Entry> entries;
};

/// Sections in file order; keys before the first header land in section "".
using Document = std::vector<Section>;

/// Subset of TOML: [section] headers, `key = value`, # comments. Values are
/// booleans, integers, floats, "strings", and flat arrays of integers or
/// strings. Throws ConfigError with the line number.
Document parse_document(std::string_view text);

// --- pipeline config ------------------------------------------------------

struct PathsConfig {
  std::filesystem::path images_dir;
  std::filesystem::path detections_file;  // empty: <workdir>/detections.jsonl
  std::filesystem::path manifest_file;    // empty: <workdir>/manifest.csv
  std::filesystem::path workdir = "work";
};

struct PipelineConfig {
  PathsConfig paths;
  imageprep::PrepConfig prep;
  bool prep_enabled = false;
  unsigned prep_workers = 0;
  features::FeatureConfig features;
  std::uint64_t seed = 1;
  ml::ClassifierConfig classifiers;
  std::vector<ml::ModelKind> enabled{ml::kAllModelKinds.begin(), ml::kAllModelKinds.end()};
  ml::ModelKind ablation_classifier = ml::ModelKind::MLP;
  int synth_images = 500;
  int synth_image_size = 1024;

  /// Throws ConfigError for out-of-range values.
  void validate() const;

  std::filesystem::path detections_path() const;
  std::filesystem::path manifest_path() const;

  /// Classifier settings with the per-model seeds derived from `seed`.
  ml::ClassifierConfig seeded_classifiers() const;
};

/// Unknown sections or keys and mistyped values are ConfigErrors.
PipelineConfig config_from_document(const Document& doc);
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);

/// Every field, in a form parse_config reads back unchanged.
std::string dump_config(const PipelineConfig& cfg);

}  // namespace drgrade::cli
