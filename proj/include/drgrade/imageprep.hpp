#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace drgrade::imageprep {

/// 8-bit image, row-major, channels interleaved.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, int c, std::uint8_t fill = 0);

  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
            static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels) +
           static_cast<std::size_t>(c);
  }
  std::uint8_t at(int x, int y, int c = 0) const { return pixels[index(x, y, c)]; }
  std::uint8_t& at(int x, int y, int c = 0) { return pixels[index(x, y, c)]; }

  /// Throws InvalidArgument on bad dimensions or pixel count.
  void validate() const;

  friend bool operator==(const Image&, const Image&) = default;
};

using RawImage = Image;

struct PrepConfig {
  int blank_threshold = 7;
  int target_size = 1024;
  double blur_sigma = 20.0;
  double weight_original = 4.0;
  double weight_blurred = -4.0;
  double gamma_offset = 128.0;

  void validate() const;
};

struct PreparedImage {
  Image image;
  double mask_radius = 0.0;
};

/// Tight bounding box of pixels whose max-channel intensity exceeds
/// `threshold`. Throws EmptyImage when there is none.
Image crop_blank_margins(const Image& img, int threshold);

/// Separable Gaussian, half-width ceil(3 sigma), symmetric-reflect borders,
/// rounded and clamped to [0, 255].
Image gaussian_blur(const Image& img, double sigma);

/// Normalized convolution restricted to the inscribed circle of a square
/// image: blur(img * mask) / blur(mask) inside the circle, 0 outside.
Image masked_gaussian_blur(const Image& img, double sigma);

/// Reflect index `i` into [0, n) with edge duplication (...cba|abc...|cba...).
int reflect_index(int i, int n) noexcept;

/// Normalized Gaussian taps for offsets -r..r, r = ceil(3 sigma).
std::vector<double> gaussian_kernel(double sigma);

/// True when pixel (x, y) of a size x size square lies inside the inscribed
/// circle (pixel-center distance <= size / 2).
bool inside_circle(int x, int y, int size) noexcept;

/// Bilinear resample with pixel-center alignment; same-size is the identity.
Image resize_bilinear(const Image& img, int width, int height);

PreparedImage circularize(const Image& img, const PrepConfig& cfg);

/// out = clamp(w_o * img + w_b * blur + gamma) inside the circle, 0 outside.
PreparedImage contrast_blend(const PreparedImage& img, const PrepConfig& cfg);

/// crop_blank_margins -> circularize -> contrast_blend.
PreparedImage preprocess_image(const Image& img, const PrepConfig& cfg);

struct BatchResult {
  std::optional<PreparedImage> image;
  std::string error;  // empty on success
};

/// Runs preprocess_image over `images` on up to `workers` threads
/// (0 = hardware concurrency). Output order matches input order.
std::vector<BatchResult> preprocess_batch(std::span<const Image> images,
                                          const PrepConfig& cfg,
                                          unsigned workers = 0);

}  // namespace drgrade::imageprep
