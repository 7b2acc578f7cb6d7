#include <algorithm>
#include <array>

#include "codecs.hpp"

namespace pq {

ImageFormat sniff_format(std::span<const std::uint8_t> bytes) noexcept {
  constexpr std::array<std::uint8_t, 8> kPng = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  auto starts_with = [&](std::initializer_list<std::uint8_t> magic) {
    return bytes.size() >= magic.size() && std::equal(magic.begin(), magic.end(), bytes.begin());
  };
  if (bytes.size() >= kPng.size() && std::equal(kPng.begin(), kPng.end(), bytes.begin())) {
    return ImageFormat::kPng;
  }
  if (starts_with({0xFF, 0xD8, 0xFF})) return ImageFormat::kJpeg;
  if (starts_with({'B', 'M'})) return ImageFormat::kBmp;
  if (starts_with({'I', 'I', 0x2A, 0x00}) || starts_with({'M', 'M', 0x00, 0x2A})) {
    return ImageFormat::kTiff;
  }
  return ImageFormat::kUnknown;
}

RasterImage decode_image(std::span<const std::uint8_t> bytes, bool fast_path,
                         const ImageLimits& limits) {
  if (bytes.empty()) {
    throw Error(ErrorCode::kUnsupportedFormat, "empty image payload");
  }
  switch (sniff_format(bytes)) {
    case ImageFormat::kPng: return detail::decode_png(bytes, limits);
    case ImageFormat::kJpeg: return detail::decode_jpeg(bytes, limits);
    case ImageFormat::kBmp: return detail::decode_bmp(bytes, limits);
    case ImageFormat::kTiff:
      if (fast_path) {
        throw Error(ErrorCode::kUnsupportedFormat,
                    "TIFF input requires the extended decoder (pil=false)");
      }
      return detail::decode_tiff(bytes, limits);
    case ImageFormat::kUnknown: break;
  }
  throw Error(ErrorCode::kUnsupportedFormat, "data does not match any supported image format");
}

}  // namespace pq
