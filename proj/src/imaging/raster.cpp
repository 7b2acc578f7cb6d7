#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "pathoquant/error.hpp"
#include "pathoquant/imaging.hpp"

namespace pq {

namespace {

void check_dims(int width, int height) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::kInvalidParameter,
                "image dimensions must be positive, got " + std::to_string(width) +
                    "x" + std::to_string(height));
  }
}

}  // namespace

RasterImage::RasterImage(int width, int height) : width_(width), height_(height) {
  check_dims(width, height);
  pixels_.assign(pixel_count() * 3, 0);
}

RasterImage::RasterImage(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  check_dims(width, height);
  if (pixels_.size() != pixel_count() * 3) {
    throw Error(ErrorCode::kInvalidParameter,
                "pixel buffer holds " + std::to_string(pixels_.size()) +
                    " bytes, expected " + std::to_string(pixel_count() * 3));
  }
}

void ImageLimits::validate() const {
  if (thumbnail_max_dim < 1 || max_dim < thumbnail_max_dim) {
    throw Error(ErrorCode::kInvalidParameter,
                "image limits require max_dim >= thumbnail_max_dim >= 1");
  }
}

ScalarPlane::ScalarPlane(int width, int height, float fill)
    : width_(width), height_(height) {
  check_dims(width, height);
  values_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

ScalarPlane::ScalarPlane(int width, int height, std::vector<float> values)
    : width_(width), height_(height), values_(std::move(values)) {
  check_dims(width, height);
  if (values_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(ErrorCode::kInvalidParameter, "plane buffer size does not match dimensions");
  }
}

double optical_density(double intensity) noexcept {
  return -std::log10((intensity + 1.0) / 256.0);
}

std::array<ODPlane, 3> rgb_to_od(const RasterImage& img) {
  std::array<float, 256> table{};
  for (int i = 0; i < 256; ++i) {
    table[i] = static_cast<float>(optical_density(i));
  }
  std::array<ODPlane, 3> od = {ODPlane(img.width(), img.height()),
                               ODPlane(img.width(), img.height()),
                               ODPlane(img.width(), img.height())};
  const auto px = img.pixels();
  const std::size_t n = img.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      od[c].values()[i] = table[px[i * 3 + c]];
    }
  }
  return od;
}

std::vector<std::uint8_t> quantize_plane(const Plane& plane) {
  std::vector<std::uint8_t> out(plane.size());
  const auto v = plane.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double clamped = std::clamp(static_cast<double>(v[i]), 0.0, 1.0);
    out[i] = static_cast<std::uint8_t>(std::floor(clamped * 255.0 + 0.5));
  }
  return out;
}

RasterImage plane_to_gray_image(const Plane& plane) {
  const auto q = quantize_plane(plane);
  std::vector<std::uint8_t> px(q.size() * 3);
  for (std::size_t i = 0; i < q.size(); ++i) {
    px[i * 3] = px[i * 3 + 1] = px[i * 3 + 2] = q[i];
  }
  return RasterImage(plane.width(), plane.height(), std::move(px));
}

}  // namespace pq
