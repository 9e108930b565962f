#include "drgrade/detections.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "drgrade/error.hpp"
#include "drgrade/text.hpp"

namespace drgrade::detect {

using ordered_json = nlohmann::ordered_json;

std::string_view to_string(Eye eye) noexcept {
  return eye == Eye::Left ? "left" : "right";
}

std::string_view to_string(LesionType type) noexcept {
  return type == LesionType::EX ? "EX" : "MA";
}

Eye parse_eye(std::string_view text) {
  const std::string lower = text::to_lower(text);
  if (lower == "left") return Eye::Left;
  if (lower == "right") return Eye::Right;
  throw Error(Errc::ValidationError, "eye must be left or right, got '" + std::string(text) + "'");
}

LesionType parse_lesion_type(std::string_view text) {
  if (text == "EX") return LesionType::EX;
  if (text == "MA") return LesionType::MA;
  throw Error(Errc::ValidationError, "lesion_type must be EX or MA, got '" + std::string(text) + "'");
}

std::string validation_failure(const LesionInstance& inst) {
  const auto& b = inst.bbox;
  const auto finite = [](double v) { return std::isfinite(v); };
  if (inst.image_id.empty()) return "image_id is empty";
  for (double v : b) {
    if (!finite(v)) return "bbox has a non-finite coordinate";
  }
  if (!finite(inst.center[0]) || !finite(inst.center[1])) return "center is not finite";
  if (!(b[0] < b[2])) return "bbox requires x0 < x1";
  if (!(b[1] < b[3])) return "bbox requires y0 < y1";
  const double cx = inst.center[0];
  const double cy = inst.center[1];
  if (cx < b[0] || cx > b[2] || cy < b[1] || cy > b[3]) return "center lies outside bbox";
  if (std::abs(cx - 0.5 * (b[0] + b[2])) > 0.5 || std::abs(cy - 0.5 * (b[1] + b[3])) > 0.5) {
    return "center differs from bbox midpoint by more than 0.5 px";
  }
  if (!finite(inst.mask_area) || !(inst.mask_area > 0.0)) return "mask_area must be > 0";
  if (inst.mask_area > (b[2] - b[0]) * (b[3] - b[1])) return "mask_area exceeds bbox area";
  if (!finite(inst.confidence) || inst.confidence < kDetectorConfidenceFloor ||
      inst.confidence > 1.0) {
    return "confidence must be in [0.35, 1.0]";
  }
  if (inst.severity_raw < 0 || inst.severity_raw > 4) return "severity_raw must be in 0..4";
  return {};
}

namespace {

constexpr std::array<std::string_view, 8> kFields = {
    "image_id", "eye", "lesion_type", "bbox", "center", "mask_area", "confidence", "severity_raw"};

template <std::size_t N>
std::array<double, N> number_array(const ordered_json& j, std::string_view name,
                                   std::size_t line) {
  if (!j.is_array() || j.size() != N) {
    throw Error(Errc::ParseError,
                std::string(name) + " must be a " + std::to_string(N) + "-element array", line);
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    if (!j[i].is_number()) throw Error(Errc::ParseError, std::string(name) + " must be numeric", line);
    out[i] = j[i].get<double>();
  }
  return out;
}

double number(const ordered_json& j, std::string_view name, std::size_t line) {
  if (!j.is_number()) throw Error(Errc::ParseError, std::string(name) + " must be numeric", line);
  return j.get<double>();
}

std::string string_field(const ordered_json& j, std::string_view name, std::size_t line) {
  if (!j.is_string()) throw Error(Errc::ParseError, std::string(name) + " must be a string", line);
  return j.get<std::string>();
}

LesionInstance parse_record(std::string_view text, std::size_t line) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::ParseError, e.what(), line);
  }
  if (!j.is_object()) throw Error(Errc::ParseError, "record must be a JSON object", line);
  for (const auto& field : kFields) {
    if (!j.contains(field)) {
      throw Error(Errc::ParseError, "missing field " + std::string(field), line);
    }
  }
  if (j.size() != kFields.size()) {
    for (const auto& [key, value] : j.items()) {
      if (std::find(kFields.begin(), kFields.end(), key) == kFields.end()) {
        throw Error(Errc::ParseError, "unknown field " + key, line);
      }
    }
  }

  LesionInstance inst;
  inst.image_id = string_field(j["image_id"], "image_id", line);
  try {
    inst.eye = parse_eye(string_field(j["eye"], "eye", line));
    inst.lesion_type = parse_lesion_type(string_field(j["lesion_type"], "lesion_type", line));
  } catch (const Error& e) {
    if (e.code() == Errc::ParseError) throw;
    throw Error(Errc::ValidationError, e.what(), line);
  }
  inst.bbox = number_array<4>(j["bbox"], "bbox", line);
  inst.center = number_array<2>(j["center"], "center", line);
  inst.mask_area = number(j["mask_area"], "mask_area", line);
  inst.confidence = number(j["confidence"], "confidence", line);
  const auto& sev = j["severity_raw"];
  if (!sev.is_number_integer()) throw Error(Errc::ParseError, "severity_raw must be an integer", line);
  const auto sev_value = sev.get<long long>();
  if (sev_value < 0 || sev_value > 4) {
    throw Error(Errc::ValidationError, "severity_raw must be in 0..4", line);
  }
  inst.severity_raw = static_cast<int>(sev_value);

  if (auto why = validation_failure(inst); !why.empty()) {
    throw Error(Errc::ValidationError, why, line);
  }
  return inst;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  return out;
}

}  // namespace

Detections read_detections(std::istream& in) {
  Detections out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto trimmed = text::trim(line);
    if (trimmed.empty()) continue;
    out.push_back(parse_record(trimmed, number));
  }
  return out;
}

Detections load_detections(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_detections(in);
}

void write_detections(std::ostream& out, const Detections& records) {
  for (const auto& r : records) {
    ordered_json j;
    j["image_id"] = r.image_id;
    j["eye"] = to_string(r.eye);
    j["lesion_type"] = to_string(r.lesion_type);
    j["bbox"] = r.bbox;
    j["center"] = r.center;
    j["mask_area"] = r.mask_area;
    j["confidence"] = r.confidence;
    j["severity_raw"] = r.severity_raw;
    out << j.dump() << '\n';
  }
}

void save_detections(const std::filesystem::path& path, const Detections& records) {
  auto out = open_output(path);
  write_detections(out, records);
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

Manifest read_manifest(std::istream& in) {
  Manifest out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t number = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++number;
    const auto trimmed = text::trim(line);
    if (trimmed.empty()) continue;
    const auto cells = text::split(trimmed, ',');
    if (!header_seen) {
      if (cells.size() != 3 || text::trim(cells[0]) != "image_id" ||
          text::trim(cells[1]) != "eye" || text::trim(cells[2]) != "severity_raw") {
        throw Error(Errc::ParseError, "manifest header must be image_id,eye,severity_raw", number);
      }
      header_seen = true;
      continue;
    }
    if (cells.size() != 3) throw Error(Errc::ParseError, "expected 3 columns", number);
    ImageManifestEntry entry;
    entry.image_id = std::string(text::trim(cells[0]));
    if (entry.image_id.empty()) throw Error(Errc::ValidationError, "image_id is empty", number);
    try {
      entry.eye = parse_eye(text::trim(cells[1]));
    } catch (const Error& e) {
      throw Error(Errc::ValidationError, e.what(), number);
    }
    const auto sev = text::parse_int(text::trim(cells[2]));
    if (!sev) throw Error(Errc::ParseError, "severity_raw must be an integer", number);
    if (*sev < 0 || *sev > 4) throw Error(Errc::ValidationError, "severity_raw must be in 0..4", number);
    entry.severity_raw = static_cast<int>(*sev);
    if (!seen.insert(entry.image_id).second) {
      throw Error(Errc::DuplicateId, "duplicate image_id " + entry.image_id, number);
    }
    out.push_back(std::move(entry));
  }
  if (!header_seen) throw Error(Errc::ParseError, "manifest is empty (missing header)", 1);
  return out;
}

Manifest load_manifest(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_manifest(in);
}

void write_manifest(std::ostream& out, const Manifest& manifest) {
  out << "image_id,eye,severity_raw\n";
  for (const auto& e : manifest) {
    out << e.image_id << ',' << to_string(e.eye) << ',' << e.severity_raw << '\n';
  }
}

void save_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  auto out = open_output(path);
  write_manifest(out, manifest);
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

FileDetectorBackend::FileDetectorBackend(const Manifest& manifest, Detections detections) {
  for (const auto& e : manifest) known_.insert(e.image_id);
  for (auto& d : detections) {
    known_.insert(d.image_id);
    auto& bucket = by_image_[d.image_id];
    bucket.push_back(std::move(d));
  }
}

Detections FileDetectorBackend::detect(std::string_view image_id) const {
  const std::string key(image_id);
  if (auto it = by_image_.find(key); it != by_image_.end()) return it->second;
  if (known_.contains(key)) return {};
  throw Error(Errc::UnknownImage, "image " + key + " is in neither the manifest nor the detections");
}

}  // namespace drgrade::detect
