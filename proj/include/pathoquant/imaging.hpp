#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pq {

/// Decoded 8-bit RGB raster, row-major, three bytes per pixel.
class RasterImage {
 public:
  RasterImage(int width, int height);
  RasterImage(int width, int height, std::vector<std::uint8_t> pixels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }

  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
  std::span<std::uint8_t> pixels() noexcept { return pixels_; }

  std::array<std::uint8_t, 3> at(int x, int y) const noexcept {
    const std::size_t i = index(x, y);
    return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
  }
  void set(int x, int y, std::array<std::uint8_t, 3> rgb) noexcept {
    const std::size_t i = index(x, y);
    pixels_[i] = rgb[0];
    pixels_[i + 1] = rgb[1];
    pixels_[i + 2] = rgb[2];
  }

  bool operator==(const RasterImage&) const = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) * 3;
  }

  int width_;
  int height_;
  std::vector<std::uint8_t> pixels_;
};

struct ImageLimits {
  int max_dim = 3000;
  int thumbnail_max_dim = 512;

  /// Throws InvalidParameter unless max_dim >= thumbnail_max_dim >= 1.
  void validate() const;
};

/// Single-channel real-valued image. Plane values live in [0,1]; ODPlane
/// values are non-negative optical densities or concentrations. Both share
/// this storage; the distinction is a naming convention at API boundaries.
class ScalarPlane {
 public:
  ScalarPlane() = default;
  ScalarPlane(int width, int height, float fill = 0.0f);
  ScalarPlane(int width, int height, std::vector<float> values);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return values_.size(); }

  float operator()(int x, int y) const noexcept { return values_[index(x, y)]; }
  float& operator()(int x, int y) noexcept { return values_[index(x, y)]; }

  std::span<const float> values() const noexcept { return values_; }
  std::span<float> values() noexcept { return values_; }

  bool same_shape(const ScalarPlane& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  bool operator==(const ScalarPlane&) const = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<float> values_;
};

using Plane = ScalarPlane;
using ODPlane = ScalarPlane;

enum class ImageFormat { kPng, kJpeg, kBmp, kTiff, kUnknown };

/// Identifies the container from its leading magic bytes.
ImageFormat sniff_format(std::span<const std::uint8_t> bytes) noexcept;

/// Decodes PNG/JPEG/BMP (and baseline TIFF unless `fast_path`) into RGB.
/// Grayscale is replicated, alpha is composited over white, and every piece
/// of source metadata is dropped. Dimensions are checked against `limits`
/// from the header before pixel data is decompressed.
RasterImage decode_image(std::span<const std::uint8_t> bytes, bool fast_path,
                         const ImageLimits& limits = {});

/// Lossless 8-bit RGB PNG carrying only IHDR/IDAT/IEND.
std::vector<std::uint8_t> encode_png(const RasterImage& img);

/// Same as encode_png for a single-channel 8-bit image.
std::vector<std::uint8_t> encode_png_gray(int width, int height,
                                          std::span<const std::uint8_t> values);

RasterImage make_thumbnail(const RasterImage& img, int max_dim);

/// Bilinear resize to exact dimensions. Source sample position for output
/// pixel x is x * in_width / out_width (top-left aligned), so an integer
/// upscale followed by the matching downscale is the identity.
RasterImage resize_bilinear(const RasterImage& img, int out_width, int out_height);
Plane resize_bilinear(const Plane& plane, int out_width, int out_height);

/// Resize by `factor`; output dimensions are round(in * factor).
RasterImage rescale(const RasterImage& img, double factor);

/// Optical density of one 8-bit (or real-valued) intensity:
/// -log10((I + 1) / 256).
double optical_density(double intensity) noexcept;

std::array<ODPlane, 3> rgb_to_od(const RasterImage& img);

/// Quantizes a [0,1] plane to 8 bits with round-half-up.
std::vector<std::uint8_t> quantize_plane(const Plane& plane);

/// 8-bit grayscale rendering of a plane, replicated to RGB.
RasterImage plane_to_gray_image(const Plane& plane);

}  // namespace pq
