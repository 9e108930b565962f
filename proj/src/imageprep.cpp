#include "drgrade/imageprep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "drgrade/error.hpp"

namespace drgrade::imageprep {

Image::Image(int w, int h, int c, std::uint8_t fill)
    : width(w), height(h), channels(c) {
  if (w < 1 || h < 1 || (c != 1 && c != 3)) {
    throw Error(Errc::InvalidArgument, "image dimensions must be positive with 1 or 3 channels");
  }
  pixels.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) *
                    static_cast<std::size_t>(c),
                fill);
}

void Image::validate() const {
  if (width < 1 || height < 1) {
    throw Error(Errc::InvalidArgument, "image width and height must be >= 1");
  }
  if (channels != 1 && channels != 3) {
    throw Error(Errc::InvalidArgument, "image must have 1 or 3 channels");
  }
  const auto expected = static_cast<std::size_t>(width) *
                        static_cast<std::size_t>(height) *
                        static_cast<std::size_t>(channels);
  if (pixels.size() != expected) {
    throw Error(Errc::InvalidArgument, "pixel count does not match width x height x channels");
  }
}

void PrepConfig::validate() const {
  if (blank_threshold < 0 || blank_threshold > 255) {
    throw Error(Errc::ConfigError, "blank_threshold must be in [0, 255]");
  }
  if (target_size < 32 || target_size % 2 != 0) {
    throw Error(Errc::ConfigError, "target_size must be even and >= 32");
  }
  if (!(blur_sigma > 0.0) || !std::isfinite(blur_sigma)) {
    throw Error(Errc::ConfigError, "blur_sigma must be > 0");
  }
}

namespace {

std::uint8_t to_u8(double v) {
  const double r = std::round(v);
  if (r <= 0.0) return 0;
  if (r >= 255.0) return 255;
  return static_cast<std::uint8_t>(r);
}

// Separable convolution of a w x h plane with `c` interleaved channels.
std::vector<double> convolve_separable(const std::vector<double>& src, int w,
                                       int h, int c,
                                       const std::vector<double>& kernel) {
  const int radius = static_cast<int>(kernel.size() / 2);
  const auto cs = static_cast<std::size_t>(c);
  const auto ws = static_cast<std::size_t>(w);
  std::vector<double> tmp(src.size(), 0.0);
  std::vector<double> out(src.size(), 0.0);

  // Reflected source offsets are precomputed per axis.
  std::vector<int> xmap(static_cast<std::size_t>(w) * kernel.size());
  for (int x = 0; x < w; ++x) {
    for (int k = -radius; k <= radius; ++k) {
      xmap[static_cast<std::size_t>(x) * kernel.size() +
           static_cast<std::size_t>(k + radius)] = reflect_index(x + k, w);
    }
  }
  for (int y = 0; y < h; ++y) {
    const double* row = src.data() + static_cast<std::size_t>(y) * ws * cs;
    double* dst = tmp.data() + static_cast<std::size_t>(y) * ws * cs;
    for (int x = 0; x < w; ++x) {
      const int* taps = &xmap[static_cast<std::size_t>(x) * kernel.size()];
      for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (std::size_t k = 0; k < kernel.size(); ++k) {
          acc += kernel[k] * row[static_cast<std::size_t>(taps[k]) * cs +
                                 static_cast<std::size_t>(ch)];
        }
        dst[static_cast<std::size_t>(x) * cs + static_cast<std::size_t>(ch)] = acc;
      }
    }
  }

  const std::size_t stride = ws * cs;
  std::vector<const double*> rows(kernel.size());
  for (int y = 0; y < h; ++y) {
    for (int k = -radius; k <= radius; ++k) {
      rows[static_cast<std::size_t>(k + radius)] =
          tmp.data() + static_cast<std::size_t>(reflect_index(y + k, h)) * stride;
    }
    double* dst = out.data() + static_cast<std::size_t>(y) * stride;
    for (std::size_t k = 0; k < kernel.size(); ++k) {
      const double wk = kernel[k];
      const double* srow = rows[k];
      for (std::size_t i = 0; i < stride; ++i) dst[i] += wk * srow[i];
    }
  }
  return out;
}

std::vector<double> to_double(const Image& img) {
  return {img.pixels.begin(), img.pixels.end()};
}

void require_square(const Image& img) {
  if (img.width != img.height) {
    throw Error(Errc::InvalidArgument, "circular operations require a square image");
  }
}

}  // namespace

int reflect_index(int i, int n) noexcept {
  if (n == 1) return 0;
  const int period = 2 * n;
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - 1 - m;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw Error(Errc::InvalidArgument, "sigma must be > 0");
  }
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

bool inside_circle(int x, int y, int size) noexcept {
  const double half = size / 2.0;
  const double dx = x + 0.5 - half;
  const double dy = y + 0.5 - half;
  return dx * dx + dy * dy <= half * half;
}

Image crop_blank_margins(const Image& img, int threshold) {
  img.validate();
  int x0 = img.width;
  int y0 = img.height;
  int x1 = -1;
  int y1 = -1;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      int peak = 0;
      for (int c = 0; c < img.channels; ++c) peak = std::max<int>(peak, img.at(x, y, c));
      if (peak > threshold) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
    }
  }
  if (x1 < 0) throw Error(Errc::EmptyImage, "no pixel exceeds the blank threshold");

  Image out(x1 - x0 + 1, y1 - y0 + 1, img.channels);
  const auto row_bytes = static_cast<std::size_t>(out.width * out.channels);
  for (int y = 0; y < out.height; ++y) {
    const auto* src = &img.pixels[img.index(x0, y0 + y)];
    std::copy(src, src + row_bytes, &out.pixels[out.index(0, y)]);
  }
  return out;
}

Image gaussian_blur(const Image& img, double sigma) {
  img.validate();
  const auto kernel = gaussian_kernel(sigma);
  const auto acc = convolve_separable(to_double(img), img.width, img.height,
                                      img.channels, kernel);
  Image out(img.width, img.height, img.channels);
  std::transform(acc.begin(), acc.end(), out.pixels.begin(), to_u8);
  return out;
}

Image masked_gaussian_blur(const Image& img, double sigma) {
  img.validate();
  require_square(img);
  const int n = img.width;
  const auto kernel = gaussian_kernel(sigma);

  std::vector<double> mask(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0);
  std::vector<double> masked = to_double(img);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const bool in = inside_circle(x, y, n);
      mask[static_cast<std::size_t>(y) * static_cast<std::size_t>(n) +
           static_cast<std::size_t>(x)] = in ? 1.0 : 0.0;
      if (!in) {
        for (int c = 0; c < img.channels; ++c) masked[img.index(x, y, c)] = 0.0;
      }
    }
  }
  const auto num = convolve_separable(masked, n, n, img.channels, kernel);
  const auto den = convolve_separable(mask, n, n, 1, kernel);

  Image out(n, n, img.channels);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      if (!inside_circle(x, y, n)) continue;
      const double d = den[static_cast<std::size_t>(y) * static_cast<std::size_t>(n) +
                           static_cast<std::size_t>(x)];
      for (int c = 0; c < img.channels; ++c) {
        out.at(x, y, c) = to_u8(num[img.index(x, y, c)] / d);
      }
    }
  }
  return out;
}

Image resize_bilinear(const Image& img, int width, int height) {
  img.validate();
  Image out(width, height, img.channels);
  const double sx = static_cast<double>(img.width) / width;
  const double sy = static_cast<double>(img.height) / height;
  for (int y = 0; y < height; ++y) {
    const double fy_src =
        std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.height - 1));
    const int y0 = static_cast<int>(std::floor(fy_src));
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double ty = fy_src - y0;
    for (int x = 0; x < width; ++x) {
      const double fx_src =
          std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.width - 1));
      const int x0 = static_cast<int>(std::floor(fx_src));
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double tx = fx_src - x0;
      for (int c = 0; c < img.channels; ++c) {
        const double top = img.at(x0, y0, c) * (1.0 - tx) + img.at(x1, y0, c) * tx;
        const double bottom = img.at(x0, y1, c) * (1.0 - tx) + img.at(x1, y1, c) * tx;
        out.at(x, y, c) = to_u8(top * (1.0 - ty) + bottom * ty);
      }
    }
  }
  return out;
}

PreparedImage circularize(const Image& img, const PrepConfig& cfg) {
  cfg.validate();
  img.validate();
  const bool any = std::any_of(img.pixels.begin(), img.pixels.end(), [&](std::uint8_t v) {
    return static_cast<int>(v) > cfg.blank_threshold;
  });
  if (!any) throw Error(Errc::EmptyImage, "no pixel exceeds the blank threshold");

  const int n = cfg.target_size;
  PreparedImage out{resize_bilinear(img, n, n), n / 2.0};
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      if (inside_circle(x, y, n)) continue;
      for (int c = 0; c < out.image.channels; ++c) out.image.at(x, y, c) = 0;
    }
  }
  // The inscribed circle's bounding box is the full square, so the second
  // margin removal leaves the image as is.
  return out;
}

PreparedImage contrast_blend(const PreparedImage& img, const PrepConfig& cfg) {
  cfg.validate();
  const Image& src = img.image;
  src.validate();
  require_square(src);
  const Image blurred = masked_gaussian_blur(src, cfg.blur_sigma);
  PreparedImage out{Image(src.width, src.height, src.channels), src.width / 2.0};
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      if (!inside_circle(x, y, src.width)) continue;
      for (int c = 0; c < src.channels; ++c) {
        out.image.at(x, y, c) =
            to_u8(cfg.weight_original * src.at(x, y, c) +
                  cfg.weight_blurred * blurred.at(x, y, c) + cfg.gamma_offset);
      }
    }
  }
  return out;
}

PreparedImage preprocess_image(const Image& img, const PrepConfig& cfg) {
  cfg.validate();
  const Image cropped = crop_blank_margins(img, cfg.blank_threshold);
  return contrast_blend(circularize(cropped, cfg), cfg);
}

std::vector<BatchResult> preprocess_batch(std::span<const Image> images,
                                          const PrepConfig& cfg, unsigned workers) {
  std::vector<BatchResult> results(images.size());
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(images.size(), 1)));

  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (std::size_t i = next++; i < images.size(); i = next++) {
      try {
        results[i].image = preprocess_image(images[i], cfg);
      } catch (const std::exception& e) {
        results[i].error = e.what();
      }
    }
  };
  if (workers <= 1) {
    run();
    return results;
  }
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run);
  }
  return results;
}

}  // namespace drgrade::imageprep
