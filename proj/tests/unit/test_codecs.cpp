#include <doctest.h>
#include <zlib.h>

#include <random>

#include "pathoquant/error.hpp"
#include "pathoquant/imaging.hpp"
#include "support/test_support.hpp"

using namespace pq;
using pqtest::Bytes;

namespace {

ErrorCode decode_error(const Bytes& bytes, bool fast = false, ImageLimits limits = {}) {
  try {
    decode_image(bytes, fast, limits);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("decode unexpectedly succeeded");
  return ErrorCode::kInternal;
}

void put32(Bytes& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}

void chunk(Bytes& png, const char* type, const Bytes& data) {
  put32(png, static_cast<std::uint32_t>(data.size()));
  Bytes body(type, type + 4);
  body.insert(body.end(), data.begin(), data.end());
  png.insert(png.end(), body.begin(), body.end());
  put32(png, static_cast<std::uint32_t>(crc32(0, body.data(), static_cast<uInt>(body.size()))));
}

// Minimal 8-bit PNG writer, filter type 0 on every row. `extra` chunks are
// inserted before IDAT.
Bytes make_png(int w, int h, int color_type, const Bytes& samples,
               const std::vector<std::pair<std::string, Bytes>>& extra = {}) {
  const int channels = color_type == 0 ? 1 : color_type == 2 ? 3 : color_type == 4 ? 2 : 4;
  Bytes raw;
  for (int y = 0; y < h; ++y) {
    raw.push_back(0);
    const auto row = samples.begin() + static_cast<std::ptrdiff_t>(y) * w * channels;
    raw.insert(raw.end(), row, row + w * channels);
  }
  uLongf len = compressBound(static_cast<uLong>(raw.size()));
  Bytes z(len);
  compress(z.data(), &len, raw.data(), static_cast<uLong>(raw.size()));
  z.resize(len);

  Bytes png = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  Bytes ihdr;
  put32(ihdr, static_cast<std::uint32_t>(w));
  put32(ihdr, static_cast<std::uint32_t>(h));
  for (std::uint8_t v : {8, color_type, 0, 0, 0}) ihdr.push_back(static_cast<std::uint8_t>(v));
  chunk(png, "IHDR", ihdr);
  for (const auto& [t, d] : extra) chunk(png, t.c_str(), d);
  chunk(png, "IDAT", z);
  chunk(png, "IEND", {});
  return png;
}

RasterImage expected_rgb(const std::string& name, int w, int h) {
  return RasterImage(w, h, pqtest::read_file(pqtest::data_path(name)));
}

}  // namespace

TEST_SUITE("codecs") {

TEST_CASE("sniffing") {
  CHECK(sniff_format(Bytes{0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A}) == ImageFormat::kPng);
  CHECK(sniff_format(Bytes{0xFF, 0xD8, 0xFF, 0xE0}) == ImageFormat::kJpeg);
  CHECK(sniff_format(Bytes{'B', 'M', 0, 0}) == ImageFormat::kBmp);
  CHECK(sniff_format(Bytes{'I', 'I', 42, 0}) == ImageFormat::kTiff);
  CHECK(sniff_format(Bytes{'M', 'M', 0, 42}) == ImageFormat::kTiff);
  CHECK(sniff_format(Bytes{'G', 'I', 'F', '8'}) == ImageFormat::kUnknown);
  CHECK(sniff_format(Bytes{}) == ImageFormat::kUnknown);
}

TEST_CASE("1x1 red PNG") {
  const auto img = decode_image(make_png(1, 1, 2, {255, 0, 0}), true);
  CHECK(img.width() == 1);
  CHECK(img.at(0, 0) == std::array<std::uint8_t, 3>{255, 0, 0});
}

TEST_CASE("grayscale PNG replicates channels") {
  const auto img = decode_image(make_png(2, 2, 0, {7, 7, 7, 7}), false);
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 2; ++x) CHECK(img.at(x, y) == std::array<std::uint8_t, 3>{7, 7, 7});
  }
}

TEST_CASE("RGBA and gray-alpha PNG composite over white") {
  const auto rgba = decode_image(make_png(2, 1, 6, {200, 100, 0, 255, 200, 100, 0, 0}), true);
  CHECK(rgba.at(0, 0) == std::array<std::uint8_t, 3>{200, 100, 0});
  CHECK(rgba.at(1, 0) == std::array<std::uint8_t, 3>{255, 255, 255});
  const auto ga = decode_image(make_png(1, 1, 4, {0, 128}), true);
  const int expect = (0 * 128 + 255 * 127 + 127) / 255;
  CHECK(ga.at(0, 0)[0] == doctest::Approx(expect).epsilon(0.01));
}

TEST_CASE("PNG round trip is exact and strips ancillary chunks") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto img = pqtest::random_image(16 + static_cast<int>(seed), 16, seed);
    const auto png = encode_png(img);
    CHECK(png[0] == 0x89);
    CHECK(png[1] == 0x50);
    CHECK(png[2] == 0x4E);
    CHECK(png[3] == 0x47);
    CHECK(decode_image(png, true) == img);
    CHECK(pqtest::png_chunks(png) == std::vector<std::string>{"IHDR", "IDAT", "IEND"});
  }
  const Bytes text = {'C', 'o', 'm', 'm', 'e', 'n', 't', 0, 'h', 'i'};
  const auto tagged = make_png(1, 1, 2, {1, 2, 3}, {{"tEXt", text}});
  const auto reencoded = encode_png(decode_image(tagged, true));
  CHECK(pqtest::png_chunks(reencoded) == std::vector<std::string>{"IHDR", "IDAT", "IEND"});
}

TEST_CASE("PNG at the 3000 limit round trips") {
  RasterImage big(3000, 3000);
  big.set(2999, 2999, {9, 8, 7});
  const auto back = decode_image(encode_png(big), true);
  CHECK(back.width() == 3000);
  CHECK(back.height() == 3000);
  CHECK(back.at(2999, 2999) == std::array<std::uint8_t, 3>{9, 8, 7});
}

TEST_CASE("oversize images are rejected from the header") {
  CHECK(decode_error(encode_png(RasterImage(3001, 100))) == ErrorCode::kImageTooLarge);
  CHECK(decode_error(encode_png(RasterImage(100, 3001))) == ErrorCode::kImageTooLarge);
  // Header declares 3001x3001 but carries one pixel of data: the size
  // check must fire before the truncated stream is noticed.
  auto png = make_png(1, 1, 2, {0, 0, 0});
  for (int off : {16, 20}) {
    png[off + 2] = 0x0B;
    png[off + 3] = 0xB9;
  }
  const auto crc = crc32(0, png.data() + 12, 17);
  for (int i = 0; i < 4; ++i) png[29 + i] = static_cast<std::uint8_t>(crc >> (24 - 8 * i));
  CHECK(decode_error(png) == ErrorCode::kImageTooLarge);
  ImageLimits small{64, 16};
  CHECK(decode_error(pqtest::write_bmp(RasterImage(65, 2), false), true, small) ==
        ErrorCode::kImageTooLarge);
  CHECK(decode_error(pqtest::write_jpeg(RasterImage(65, 2), 90, false), true, small) ==
        ErrorCode::kImageTooLarge);
  CHECK(decode_error(pqtest::write_tiff(RasterImage(2, 65), false, 8), false, small) ==
        ErrorCode::kImageTooLarge);
}

TEST_CASE("garbage and truncated data") {
  CHECK(decode_error(Bytes{}) == ErrorCode::kUnsupportedFormat);
  CHECK(decode_error(Bytes{'G', 'I', 'F', '8', '9', 'a', 0, 0}) == ErrorCode::kUnsupportedFormat);
  auto png = encode_png(pqtest::random_image(32, 32, 1));
  png.resize(png.size() / 2);
  CHECK(decode_error(png) == ErrorCode::kCorruptImage);
  auto jpg = pqtest::write_jpeg(pqtest::random_image(32, 32, 1), 90, false);
  jpg.resize(20);
  CHECK(decode_error(jpg) == ErrorCode::kCorruptImage);
  auto bmp = pqtest::write_bmp(pqtest::random_image(8, 8, 1), false);
  bmp.resize(60);
  CHECK(decode_error(bmp) == ErrorCode::kCorruptImage);
  auto tif = pqtest::write_tiff(pqtest::random_image(8, 8, 1), false, 8);
  tif.resize(tif.size() - 10);
  CHECK(decode_error(tif) == ErrorCode::kCorruptImage);
}

TEST_CASE("JPEG decode drops metadata and stays close") {
  const auto src = pqtest::solid_image(40, 24, {180, 120, 60});
  const auto jpg = pqtest::write_jpeg(src, 95, true);
  const auto img = decode_image(jpg, true);
  REQUIRE(img.width() == 40);
  REQUIRE(img.height() == 24);
  for (int c = 0; c < 3; ++c) CHECK(std::abs(int{img.at(20, 12)[c]} - int{src.at(20, 12)[c]}) <= 3);
  const auto png = encode_png(img);
  CHECK(pqtest::png_chunks(png) == std::vector<std::string>{"IHDR", "IDAT", "IEND"});
  const std::string s = pqtest::as_string(png);
  CHECK(s.find("Exif") == std::string::npos);
  CHECK(s.find("patient-id") == std::string::npos);
}

TEST_CASE("BMP variants decode exactly") {
  const auto img = pqtest::random_image(13, 7, 21);
  CHECK(decode_image(pqtest::write_bmp(img, false), true) == img);
  CHECK(decode_image(pqtest::write_bmp(img, true), true) == img);
  CHECK(decode_image(pqtest::write_bmp(img, false, 32, 255), true) == img);
}

TEST_CASE("TIFF requires the extended path") {
  const auto tif = pqtest::read_file(pqtest::data_path("rgb_raw.tif"));
  CHECK(decode_error(tif, true) == ErrorCode::kUnsupportedFormat);
}

TEST_CASE("TIFF compressions match raw pixels") {
  const auto expect = expected_rgb("rgb_64x48.rgb", 64, 48);
  for (const char* name : {"rgb_raw.tif", "rgb_lzw.tif", "rgb_deflate.tif", "rgb_packbits.tif"}) {
    CAPTURE(name);
    CHECK(decode_image(pqtest::read_file(pqtest::data_path(name)), false) == expect);
  }
}

TEST_CASE("TIFF grayscale and alpha") {
  const auto gray = pqtest::read_file(pqtest::data_path("gray_64x48.raw"));
  const auto img = decode_image(pqtest::read_file(pqtest::data_path("gray_lzw.tif")), false);
  REQUIRE(img.width() == 64);
  for (int i = 0; i < 64 * 48; ++i) {
    CHECK(img.pixels()[i * 3] == gray[i]);
    CHECK(img.pixels()[i * 3 + 2] == gray[i]);
  }
  const auto rgba = pqtest::read_file(pqtest::data_path("rgba_64x48.rgba"));
  const auto composited = decode_image(pqtest::read_file(pqtest::data_path("rgba_lzw.tif")), false);
  for (int i = 0; i < 64 * 48; ++i) {
    const int a = rgba[i * 4 + 3];
    for (int c = 0; c < 3; ++c) {
      const int v = rgba[i * 4 + c];
      CHECK(composited.pixels()[i * 3 + c] == (v * a + 255 * (255 - a) + 127) / 255);
    }
  }
}

TEST_CASE("TIFF byte orders and strip layouts") {
  const auto img = pqtest::random_image(19, 23, 4);
  for (bool be : {false, true}) {
    for (int rps : {1, 5, 23}) {
      CAPTURE(be);
      CAPTURE(rps);
      CHECK(decode_image(pqtest::write_tiff(img, be, rps), false) == img);
    }
  }
}

TEST_CASE("gray PNG encoder") {
  const std::vector<std::uint8_t> v = {0, 50, 100, 150, 200, 250};
  const auto png = encode_png_gray(3, 2, v);
  const auto img = decode_image(png, true);
  CHECK(img.at(2, 1) == std::array<std::uint8_t, 3>{250, 250, 250});
  CHECK(img.at(1, 0) == std::array<std::uint8_t, 3>{50, 50, 50});
}

}  // TEST_SUITE
