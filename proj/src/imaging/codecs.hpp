#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "pathoquant/error.hpp"
#include "pathoquant/imaging.hpp"

namespace pq::detail {

RasterImage decode_png(std::span<const std::uint8_t> bytes, const ImageLimits& limits);
RasterImage decode_jpeg(std::span<const std::uint8_t> bytes, const ImageLimits& limits);
RasterImage decode_bmp(std::span<const std::uint8_t> bytes, const ImageLimits& limits);
RasterImage decode_tiff(std::span<const std::uint8_t> bytes, const ImageLimits& limits);

inline void check_limits(long long width, long long height, const ImageLimits& limits,
                         const char* format) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::kCorruptImage,
                std::string(format) + " header declares an empty image");
  }
  if (width > limits.max_dim || height > limits.max_dim) {
    throw Error(ErrorCode::kImageTooLarge,
                "image is " + std::to_string(width) + "x" + std::to_string(height) +
                    ", limit is " + std::to_string(limits.max_dim) + "x" +
                    std::to_string(limits.max_dim));
  }
}

/// Composites an 8-bit straight-alpha sample over white.
inline std::uint8_t over_white(std::uint8_t value, std::uint8_t alpha) {
  return static_cast<std::uint8_t>((value * alpha + 255 * (255 - alpha) + 127) / 255);
}

}  // namespace pq::detail
