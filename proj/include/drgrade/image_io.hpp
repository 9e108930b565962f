#pragma once

#include <filesystem>

#include "drgrade/imageprep.hpp"

namespace drgrade::imageprep {

/// Loads a PNG/JPEG as 1 or 3 channels (alpha dropped, channel order as
/// stored by the decoder). Throws IoError when the file cannot be decoded.
Image read_image(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const Image& img);

/// Case-insensitive .png / .jpg / .jpeg check.
bool is_supported_image(const std::filesystem::path& path);

}  // namespace drgrade::imageprep
