#include <png.h>

#include <csetjmp>
#include <cstring>
#include <string>
#include <vector>

#include "codecs.hpp"

namespace pq {

namespace {

struct MemoryReader {
  std::span<const std::uint8_t> data;
  std::size_t offset = 0;
};

struct PngErrorSink {
  char message[256] = {};
};

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* sink = static_cast<PngErrorSink*>(png_get_error_ptr(png));
  if (sink != nullptr) {
    std::strncpy(sink->message, msg, sizeof(sink->message) - 1);
  }
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

void png_read_fn(png_structp png, png_bytep out, png_size_t n) {
  auto* reader = static_cast<MemoryReader*>(png_get_io_ptr(png));
  if (reader->offset + n > reader->data.size()) {
    png_error(png, "unexpected end of PNG data");
  }
  std::memcpy(out, reader->data.data() + reader->offset, n);
  reader->offset += n;
}

void png_write_fn(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + n);
}

void png_flush_fn(png_structp) {}

struct ReadHandles {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~ReadHandles() { png_destroy_read_struct(&png, info ? &info : nullptr, nullptr); }
};

struct WriteHandles {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~WriteHandles() { png_destroy_write_struct(&png, info ? &info : nullptr); }
};

struct DecodedRows {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int channels = 0;
  bool too_large = false;
  std::vector<std::uint8_t> buffer;
  std::vector<png_bytep> rows;
};

// Runs under setjmp; on longjmp only `out` (owned by the caller) is used.
bool read_png_body(png_structp png, png_infop info, const ImageLimits& limits,
                   DecodedRows* out) {
  if (setjmp(png_jmpbuf(png))) return false;

  png_read_info(png, info);
  out->width = png_get_image_width(png, info);
  out->height = png_get_image_height(png, info);
  if (out->width > static_cast<png_uint_32>(limits.max_dim) ||
      out->height > static_cast<png_uint_32>(limits.max_dim)) {
    out->too_large = true;
    return true;
  }

  const int color_type = png_get_color_type(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  out->channels = png_get_channels(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  out->buffer.resize(rowbytes * out->height);
  out->rows.resize(out->height);
  for (png_uint_32 y = 0; y < out->height; ++y) {
    out->rows[y] = out->buffer.data() + y * rowbytes;
  }
  png_read_image(png, out->rows.data());
  png_read_end(png, nullptr);
  return true;
}

bool write_png_body(png_structp png, png_infop info, int width, int height, int color_type,
                    int channels, const std::uint8_t* pixels) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 3);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(pixels + y * stride));
  }
  png_write_end(png, nullptr);
  return true;
}

std::vector<std::uint8_t> write_png(int width, int height, int color_type, int channels,
                                    const std::uint8_t* pixels) {
  std::vector<std::uint8_t> out;
  out.reserve(static_cast<std::size_t>(width) * height * channels / 2 + 1024);
  PngErrorSink sink;
  WriteHandles h;
  h.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &sink, png_error_fn, png_warning_fn);
  if (h.png == nullptr) throw Error(ErrorCode::kInternal, "png_create_write_struct failed");
  h.info = png_create_info_struct(h.png);
  if (h.info == nullptr) throw Error(ErrorCode::kInternal, "png_create_info_struct failed");
  png_set_write_fn(h.png, &out, png_write_fn, png_flush_fn);
  if (!write_png_body(h.png, h.info, width, height, color_type, channels, pixels)) {
    throw Error(ErrorCode::kInternal, std::string("PNG encode failed: ") + sink.message);
  }
  return out;
}

}  // namespace

namespace detail {

RasterImage decode_png(std::span<const std::uint8_t> bytes, const ImageLimits& limits) {
  PngErrorSink sink;
  MemoryReader reader{bytes, 0};
  DecodedRows rows;
  {
    ReadHandles h;
    h.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &sink, png_error_fn, png_warning_fn);
    if (h.png == nullptr) throw Error(ErrorCode::kInternal, "png_create_read_struct failed");
    h.info = png_create_info_struct(h.png);
    if (h.info == nullptr) throw Error(ErrorCode::kInternal, "png_create_info_struct failed");
    png_set_read_fn(h.png, &reader, png_read_fn);
    // Oversized headers must reach our own max_dim check rather than fail
    // inside libpng; nothing is allocated before that check.
    png_set_user_limits(h.png, PNG_UINT_31_MAX, PNG_UINT_31_MAX);
    if (!read_png_body(h.png, h.info, limits, &rows)) {
      throw Error(ErrorCode::kCorruptImage, std::string("PNG decode failed: ") + sink.message);
    }
  }
  check_limits(rows.width, rows.height, limits, "PNG");

  const auto w = static_cast<int>(rows.width);
  const auto h = static_cast<int>(rows.height);
  if (rows.channels == 3) {
    return RasterImage(w, h, std::move(rows.buffer));
  }
  if (rows.channels != 4) {
    throw Error(ErrorCode::kCorruptImage, "unexpected PNG channel layout");
  }
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(w) * h * 3);
  const std::size_t n = static_cast<std::size_t>(w) * h;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t a = rows.buffer[i * 4 + 3];
    for (int c = 0; c < 3; ++c) {
      rgb[i * 3 + c] = over_white(rows.buffer[i * 4 + c], a);
    }
  }
  return RasterImage(w, h, std::move(rgb));
}

}  // namespace detail

std::vector<std::uint8_t> encode_png(const RasterImage& img) {
  return write_png(img.width(), img.height(), PNG_COLOR_TYPE_RGB, 3, img.pixels().data());
}

std::vector<std::uint8_t> encode_png_gray(int width, int height,
                                          std::span<const std::uint8_t> values) {
  if (width < 1 || height < 1 ||
      values.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(ErrorCode::kInvalidParameter, "grayscale buffer does not match dimensions");
  }
  return write_png(width, height, PNG_COLOR_TYPE_GRAY, 1, values.data());
}

}  // namespace pq
