#include <cstring>
#include <string>
#include <vector>

#include "codecs.hpp"

namespace pq::detail {

namespace {

std::uint32_t le32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

std::uint16_t le16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

constexpr std::size_t kFileHeaderSize = 14;
constexpr std::uint32_t kBiRgb = 0;

}  // namespace

// Uncompressed 24- and 32-bit (BI_RGB) bitmaps, bottom-up or top-down.
RasterImage decode_bmp(std::span<const std::uint8_t> bytes, const ImageLimits& limits) {
  if (bytes.size() < kFileHeaderSize + 40) {
    throw Error(ErrorCode::kCorruptImage, "BMP header truncated");
  }
  const std::uint32_t data_offset = le32(bytes, 10);
  const std::uint32_t dib_size = le32(bytes, 14);
  if (dib_size < 40) {
    throw Error(ErrorCode::kUnsupportedFormat, "only BITMAPINFOHEADER-style BMPs are supported");
  }
  const auto width = static_cast<std::int32_t>(le32(bytes, 18));
  const auto raw_height = static_cast<std::int32_t>(le32(bytes, 22));
  const std::uint16_t bpp = le16(bytes, 28);
  const std::uint32_t compression = le32(bytes, 30);

  const bool top_down = raw_height < 0;
  const long long height = top_down ? -static_cast<long long>(raw_height) : raw_height;
  check_limits(width, height, limits, "BMP");

  if (compression != kBiRgb || (bpp != 24 && bpp != 32)) {
    throw Error(ErrorCode::kUnsupportedFormat,
                "BMP with " + std::to_string(bpp) + " bpp / compression " +
                    std::to_string(compression) + " is not supported");
  }

  const std::size_t bytes_pp = bpp / 8;
  const std::size_t stride = (static_cast<std::size_t>(width) * bytes_pp + 3) & ~std::size_t{3};
  if (data_offset > bytes.size() || stride * height > bytes.size() - data_offset) {
    throw Error(ErrorCode::kCorruptImage, "BMP pixel data truncated");
  }

  const int w = width;
  const int h = static_cast<int>(height);
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y) {
    const int src_row = top_down ? y : h - 1 - y;
    const std::uint8_t* src = bytes.data() + data_offset + src_row * stride;
    std::uint8_t* dst = rgb.data() + static_cast<std::size_t>(y) * w * 3;
    for (int x = 0; x < w; ++x) {
      dst[x * 3] = src[x * bytes_pp + 2];
      dst[x * 3 + 1] = src[x * bytes_pp + 1];
      dst[x * 3 + 2] = src[x * bytes_pp];
    }
  }
  return RasterImage(w, h, std::move(rgb));
}

}  // namespace pq::detail
