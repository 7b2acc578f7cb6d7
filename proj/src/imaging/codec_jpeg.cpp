#include <cstdio>
// jpeglib.h needs FILE/size_t declared first.
#include <jpeglib.h>

#include <csetjmp>
#include <string>
#include <vector>

#include "codecs.hpp"

namespace pq {

namespace {

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX] = {};
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

void jpeg_silent(j_common_ptr, int) {}

struct DecompressGuard {
  jpeg_decompress_struct* cinfo;
  ~DecompressGuard() { jpeg_destroy_decompress(cinfo); }
};

enum class JpegStatus { kOk, kFailed, kTooLarge, kUnsupportedColor };

struct JpegResult {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};

JpegStatus read_jpeg_body(jpeg_decompress_struct* cinfo, JpegErrorManager* err,
                          std::span<const std::uint8_t> bytes, const ImageLimits& limits,
                          JpegResult* out) {
  if (setjmp(err->jump)) return JpegStatus::kFailed;

  jpeg_mem_src(cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(cinfo, TRUE);
  out->width = static_cast<int>(cinfo->image_width);
  out->height = static_cast<int>(cinfo->image_height);
  if (cinfo->image_width > static_cast<JDIMENSION>(limits.max_dim) ||
      cinfo->image_height > static_cast<JDIMENSION>(limits.max_dim)) {
    return JpegStatus::kTooLarge;
  }
  if (cinfo->jpeg_color_space == JCS_CMYK || cinfo->jpeg_color_space == JCS_YCCK) {
    return JpegStatus::kUnsupportedColor;
  }
  cinfo->out_color_space = JCS_RGB;
  jpeg_start_decompress(cinfo);

  const std::size_t stride = static_cast<std::size_t>(cinfo->output_width) * 3;
  out->pixels.resize(stride * cinfo->output_height);
  while (cinfo->output_scanline < cinfo->output_height) {
    JSAMPROW row = out->pixels.data() + cinfo->output_scanline * stride;
    jpeg_read_scanlines(cinfo, &row, 1);
  }
  jpeg_finish_decompress(cinfo);
  return JpegStatus::kOk;
}

}  // namespace

namespace detail {

RasterImage decode_jpeg(std::span<const std::uint8_t> bytes, const ImageLimits& limits) {
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  err.base.emit_message = jpeg_silent;
  jpeg_create_decompress(&cinfo);
  DecompressGuard guard{&cinfo};

  JpegResult result;
  switch (read_jpeg_body(&cinfo, &err, bytes, limits, &result)) {
    case JpegStatus::kFailed:
      throw Error(ErrorCode::kCorruptImage, std::string("JPEG decode failed: ") + err.message);
    case JpegStatus::kTooLarge:
      check_limits(result.width, result.height, limits, "JPEG");
      break;
    case JpegStatus::kUnsupportedColor:
      throw Error(ErrorCode::kUnsupportedFormat, "CMYK/YCCK JPEG is not supported");
    case JpegStatus::kOk:
      break;
  }
  check_limits(result.width, result.height, limits, "JPEG");
  return RasterImage(result.width, result.height, std::move(result.pixels));
}

}  // namespace detail

}  // namespace pq
