#include <doctest.h>

#include <cmath>
#include <random>

#include "pathoquant/error.hpp"
#include "pathoquant/imaging.hpp"
#include "support/test_support.hpp"

using namespace pq;
using pqtest::random_image;
using pqtest::solid_image;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected pq::Error");
  return ErrorCode::kInternal;
}

RasterImage checkerboard(int w, int h, int cell) {
  RasterImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::uint8_t v = ((x / cell + y / cell) % 2) ? 230 : 20;
      img.set(x, y, {v, static_cast<std::uint8_t>(255 - v), v});
    }
  }
  return img;
}

}  // namespace

TEST_SUITE("imaging") {

TEST_CASE("raster rejects bad geometry") {
  CHECK_THROWS_AS(RasterImage(0, 5), Error);
  CHECK_THROWS_AS(RasterImage(2, 2, std::vector<std::uint8_t>(11)), Error);
  RasterImage img(3, 2);
  CHECK(img.pixels().size() == 18);
}

TEST_CASE("limits validation") {
  ImageLimits ok;
  CHECK_NOTHROW(ok.validate());
  ImageLimits bad{100, 200};
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::kInvalidParameter);
  ImageLimits zero{100, 0};
  CHECK_THROWS_AS(zero.validate(), Error);
}

TEST_CASE("thumbnail dimensions") {
  CHECK(make_thumbnail(solid_image(3000, 1500, {1, 2, 3}), 512).width() == 512);
  CHECK(make_thumbnail(solid_image(3000, 1500, {1, 2, 3}), 512).height() == 256);
  const auto tall = make_thumbnail(solid_image(1500, 3000, {1, 2, 3}), 512);
  CHECK(tall.width() == 256);
  CHECK(tall.height() == 512);
  const auto small = random_image(100, 100, 3);
  CHECK(make_thumbnail(small, 512) == small);
}

TEST_CASE("thumbnail property: never grows, long side clamps") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 60; ++i) {
    const int w = 1 + static_cast<int>(rng() % 900);
    const int h = 1 + static_cast<int>(rng() % 900);
    const int m = 1 + static_cast<int>(rng() % 600);
    const auto t = make_thumbnail(RasterImage(w, h), m);
    CHECK(t.width() <= w);
    CHECK(t.height() <= h);
    CHECK(std::max(t.width(), t.height()) == std::min(m, std::max(w, h)));
    CHECK(t.width() >= 1);
    CHECK(t.height() >= 1);
  }
}

TEST_CASE("rescale identity, constant field, invalid factors") {
  const auto img = random_image(37, 23, 5);
  CHECK(rescale(img, 1.0) == img);
  const auto half = rescale(solid_image(100, 100, {12, 140, 250}), 0.5);
  REQUIRE(half.width() == 50);
  REQUIRE(half.height() == 50);
  for (int y = 0; y < 50; ++y) {
    for (int x = 0; x < 50; ++x) CHECK(half.at(x, y) == std::array<std::uint8_t, 3>{12, 140, 250});
  }
  CHECK(code_of([&] { rescale(img, 0.0); }) == ErrorCode::kInvalidScale);
  CHECK(code_of([&] { rescale(img, -2.0); }) == ErrorCode::kInvalidScale);
  CHECK(code_of([&] { rescale(RasterImage(1, 1), 0.1); }) == ErrorCode::kInvalidScale);
}

TEST_CASE("rescale output dims are round(in * factor)") {
  for (double f : {0.5, 2.0, 0.37, 1.5}) {
    const auto out = rescale(RasterImage(101, 33), f);
    CHECK(out.width() == static_cast<int>(std::lround(101 * f)));
    CHECK(out.height() == static_cast<int>(std::lround(33 * f)));
  }
}

TEST_CASE("checkerboard up then down round trip within 2 levels") {
  const auto img = checkerboard(64, 64, 4);
  const auto back = rescale(rescale(img, 2.0), 0.5);
  REQUIRE(back.width() == 64);
  const auto a = img.pixels();
  const auto b = back.pixels();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(int{a[i]} - int{b[i]}) <= 2);
}

TEST_CASE("optical density direct evaluation") {
  CHECK(std::abs(optical_density(255)) < 0.01);
  CHECK(optical_density(0) == doctest::Approx(-std::log10(1.0 / 256.0)));
  CHECK(optical_density(0) == doctest::Approx(2.408).epsilon(1e-3));
  const auto od = rgb_to_od(solid_image(2, 2, {127, 255, 255}));
  CHECK(od[0](1, 1) == doctest::Approx(0.30103).epsilon(1e-4));
  CHECK(std::abs(od[1](0, 0)) < 0.01);
  CHECK(std::abs(od[2](0, 0)) < 0.01);
}

TEST_CASE("optical density is non-negative and strictly decreasing") {
  double prev = optical_density(0);
  CHECK(prev > 0);
  for (int i = 1; i < 256; ++i) {
    const double v = optical_density(i);
    CHECK(v < prev);
    CHECK(v >= 0.0);
    prev = v;
  }
}

TEST_CASE("quantize plane uses round half up") {
  Plane p(4, 1, std::vector<float>{0.0f, 0.5f / 255.0f, 1.0f, 0.25f});
  const auto q = quantize_plane(p);
  CHECK(q[0] == 0);
  CHECK(q[1] == 1);
  CHECK(q[2] == 255);
  CHECK(q[3] == 64);
}

TEST_CASE("bilinear plane resize preserves constants") {
  Plane p(7, 5, 0.3f);
  const auto r = resize_bilinear(p, 13, 11);
  for (float v : r.values()) CHECK(v == doctest::Approx(0.3f));
}

}  // TEST_SUITE
