#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "drgrade/imageprep.hpp"

namespace drgrade::detect {

enum class Eye { Left, Right };
enum class LesionType { EX, MA };

/// Lowest confidence the upstream detector emits.
inline constexpr double kDetectorConfidenceFloor = 0.35;

std::string_view to_string(Eye eye) noexcept;
std::string_view to_string(LesionType type) noexcept;
Eye parse_eye(std::string_view text);
LesionType parse_lesion_type(std::string_view text);

struct LesionInstance {
  std::string image_id;
  Eye eye = Eye::Left;
  LesionType lesion_type = LesionType::EX;
  std::array<double, 4> bbox{};  // x0, y0, x1, y1
  std::array<double, 2> center{};
  double mask_area = 0.0;
  double confidence = 0.0;
  int severity_raw = 0;

  friend bool operator==(const LesionInstance&, const LesionInstance&) = default;
};

struct ImageManifestEntry {
  std::string image_id;
  Eye eye = Eye::Left;
  int severity_raw = 0;

  friend bool operator==(const ImageManifestEntry&, const ImageManifestEntry&) = default;
};

using Manifest = std::vector<ImageManifestEntry>;
using Detections = std::vector<LesionInstance>;

/// Empty string when the record satisfies every invariant, otherwise the
/// first violated rule.
std::string validation_failure(const LesionInstance& inst);

/// JSON Lines, one record per line. Blank lines are skipped. Throws
/// ParseError / ValidationError carrying the 1-based line number.
Detections read_detections(std::istream& in);
Detections load_detections(const std::filesystem::path& path);

/// Inverse of read_detections; output is byte-stable for identical input.
void write_detections(std::ostream& out, const Detections& records);
void save_detections(const std::filesystem::path& path, const Detections& records);

/// CSV with header image_id,eye,severity_raw.
Manifest read_manifest(std::istream& in);
Manifest load_manifest(const std::filesystem::path& path);
void write_manifest(std::ostream& out, const Manifest& manifest);
void save_manifest(const std::filesystem::path& path, const Manifest& manifest);

/// Source of lesion detections for a prepared image. A live segmentation
/// model can implement this interface out of process.
class DetectorBackend {
 public:
  virtual ~DetectorBackend() = default;

  virtual Detections detect(std::string_view image_id) const = 0;

  /// Backends that work from records ignore the pixels.
  virtual Detections detect(std::string_view image_id,
                            const imageprep::PreparedImage& /*image*/) const {
    return detect(image_id);
  }
};

/// Serves precomputed records. Ids in the manifest without records are
/// healthy images and yield an empty list; anything else is UnknownImage.
class FileDetectorBackend final : public DetectorBackend {
 public:
  FileDetectorBackend(const Manifest& manifest, Detections detections);

  Detections detect(std::string_view image_id) const override;
  using DetectorBackend::detect;

 private:
  std::unordered_set<std::string> known_;
  std::unordered_map<std::string, Detections> by_image_;
};

}  // namespace drgrade::detect
