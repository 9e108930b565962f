#include "drgrade/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "drgrade/error.hpp"

namespace drgrade::imageprep {

Image read_image(const std::filesystem::path& path) {
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (mat.empty()) throw Error(Errc::IoError, "cannot decode image " + path.string());
  if (mat.depth() != CV_8U) {
    cv::Mat converted;
    const double scale = mat.depth() == CV_16U ? 1.0 / 257.0 : 1.0;
    mat.convertTo(converted, CV_8U, scale);
    mat = converted;
  }
  if (mat.channels() == 4) {
    cv::Mat bgr;
    cv::cvtColor(mat, bgr, cv::COLOR_BGRA2BGR);
    mat = bgr;
  } else if (mat.channels() == 2) {
    throw Error(Errc::UnsupportedFormat, "two-channel images are not supported: " + path.string());
  }
  Image out(mat.cols, mat.rows, mat.channels());
  const auto row_bytes = static_cast<std::size_t>(mat.cols * mat.channels());
  for (int y = 0; y < mat.rows; ++y) {
    const auto* src = mat.ptr<std::uint8_t>(y);
    std::copy(src, src + row_bytes, &out.pixels[out.index(0, y)]);
  }
  return out;
}

void write_png(const std::filesystem::path& path, const Image& img) {
  img.validate();
  const int type = img.channels == 3 ? CV_8UC3 : CV_8UC1;
  // cv::Mat wraps the buffer without copying; imwrite only reads it.
  const cv::Mat mat(img.height, img.width, type,
                    const_cast<std::uint8_t*>(img.pixels.data()));
  if (!cv::imwrite(path.string(), mat)) {
    throw Error(Errc::IoError, "cannot write " + path.string());
  }
}

bool is_supported_image(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace drgrade::imageprep
