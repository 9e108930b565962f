#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "drgrade/config.hpp"

namespace drgrade::cli {

enum ExitCode : int { kOk = 0, kRuntimeFailure = 1, kConfigError = 2 };

/// Fixed artifact names inside the workdir.
namespace artifact {
inline constexpr const char* kManifest = "manifest.csv";
inline constexpr const char* kDetections = "detections.jsonl";
inline constexpr const char* kPreparedDir = "prepared";
inline constexpr const char* kTrain = "train.csv";
inline constexpr const char* kVal = "val.csv";
inline constexpr const char* kTest = "test.csv";
inline constexpr const char* kScaler = "scaler.json";
inline constexpr const char* kReportText = "report.txt";
inline constexpr const char* kReportJson = "report.json";
inline constexpr const char* kAblationText = "ablation.txt";
inline constexpr const char* kAblationJson = "ablation.json";
inline constexpr const char* kLock = ".drgrade.lock";
std::string model_file(ml::ModelKind kind);
}  // namespace artifact

/// Stage runners. Each returns an ExitCode, writes its artifacts under
/// cfg.paths.workdir and, on failure, a `<command>.failed` marker.
int cmd_synth(const PipelineConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_prep(const PipelineConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_features(const PipelineConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_train(const PipelineConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_eval(const PipelineConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_ablate(const PipelineConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_pipeline(const PipelineConfig& cfg, std::ostream& out, std::ostream& err);

/// Full command line: `drgrade [--config P] [--seed N] [--workdir P] <command> ...`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace drgrade::cli
