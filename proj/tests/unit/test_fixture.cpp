#include <doctest.h>

#include <cmath>
#include <json.hpp>
#include <random>

#include "pathoquant/error.hpp"
#include "pathoquant/fixture.hpp"
#include "pathoquant/postprocess.hpp"
#include "support/test_support.hpp"

using namespace pq;
using nlohmann::json;

namespace {

QuantResult run_default(const RasterImage& img) {
  const auto out = infer(img, Resolution::k20x, ReferenceBackend{});
  return postprocess(quantize_seg_scores(out.seg), {}).quant;
}

}  // namespace

TEST_SUITE("fixture") {

TEST_CASE("disk area counts lattice points") {
  for (int r = 0; r <= 20; ++r) {
    std::int64_t n = 0;
    for (int y = -r; y <= r; ++y) {
      for (int x = -r; x <= r; ++x) n += (x * x + y * y <= r * r);
    }
    CHECK(disk_area(r) == n);
  }
  CHECK(disk_area(4) == 49);
}

TEST_CASE("random specs satisfy the packing invariants") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 30; ++i) {
    const int total = 1 + static_cast<int>(rng() % 80);
    const int pos = static_cast<int>(rng() % (total + 1));
    const auto spec = random_fixture_spec(total, pos, rng());
    CHECK(spec.cells.size() == static_cast<std::size_t>(total));
    CHECK(std::count_if(spec.cells.begin(), spec.cells.end(),
                        [](const FixtureCell& c) { return c.kind == StainKind::kDab; }) == pos);
    CHECK_NOTHROW(spec.validate());
    for (std::size_t a = 0; a < spec.cells.size(); ++a) {
      const auto& c = spec.cells[a];
      CHECK(c.center_x - c.radius >= 0);
      CHECK(c.center_x + c.radius < spec.width);
      for (std::size_t b = a + 1; b < spec.cells.size(); ++b) {
        const auto& d = spec.cells[b];
        CHECK(std::hypot(c.center_x - d.center_x, c.center_y - d.center_y) - c.radius - d.radius >= 4.0);
      }
    }
  }
}

TEST_CASE("validation rejects broken specs") {
  FixtureSpec s;
  s.width = 100;
  s.height = 100;
  s.cells = {{50, 50, 3, StainKind::kDab}};
  CHECK_THROWS_AS(s.validate(), Error);
  s.cells = {{50, 50, 21, StainKind::kDab}};
  CHECK_THROWS_AS(s.validate(), Error);
  s.cells = {{5, 50, 10, StainKind::kDab}};
  CHECK_THROWS_AS(s.validate(), Error);
  s.cells = {{30, 50, 10, StainKind::kDab}, {53, 50, 10, StainKind::kDab}};
  CHECK_THROWS_AS(s.validate(), Error);
  s.cells = {{30, 50, 10, StainKind::kDab}, {54, 50, 10, StainKind::kDab}};
  CHECK_NOTHROW(s.validate());
}

TEST_CASE("infeasible packing and bad counts") {
  CHECK_THROWS_AS(random_fixture_spec(5, 6, 1), Error);
  CHECK_THROWS_AS(random_fixture_spec(-1, 0, 1), Error);
  try {
    random_fixture_spec(500, 0, 1, {64, 64, 5, 10, 10000});
    FAIL("expected infeasible packing");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidParameter);
    CHECK(std::string(e.what()).find("infeasible") != std::string::npos);
  }
}

TEST_CASE("same seed gives byte-identical images") {
  const auto a = encode_png(render_fixture(random_fixture_spec(50, 20, 7)));
  const auto b = encode_png(render_fixture(random_fixture_spec(50, 20, 7)));
  CHECK(a == b);
  const auto c = encode_png(render_fixture(random_fixture_spec(50, 20, 8)));
  CHECK(a != c);
}

TEST_CASE("disk colors follow the forward stain model") {
  FixtureSpec s;
  s.width = 64;
  s.height = 64;
  s.cells = {{16, 16, 8, StainKind::kHematoxylin}, {44, 44, 8, StainKind::kDab}};
  const auto img = render_fixture(s);
  const auto stains = StainMatrix::standard_hdab();
  for (int c = 0; c < 3; ++c) {
    CHECK(img.at(16, 16)[c] == std::lround(255.0 * std::pow(10.0, -stains.hema()[c])));
    CHECK(img.at(44, 44)[c] == std::lround(255.0 * std::pow(10.0, -stains.dab()[c])));
  }
  CHECK(img.at(0, 63) == std::array<std::uint8_t, 3>{255, 255, 255});
  std::int64_t painted = 0;
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) painted += img.at(x, y)[0] != 255;
  }
  CHECK(painted == 2 * disk_area(8));
}

TEST_CASE("spec json round trip and truth") {
  const auto spec = random_fixture_spec(12, 5, 3);
  const auto again = parse_fixture_spec(fixture_spec_to_json(spec));
  CHECK(again.width == spec.width);
  REQUIRE(again.cells.size() == spec.cells.size());
  for (std::size_t i = 0; i < spec.cells.size(); ++i) {
    CHECK(again.cells[i].center_x == spec.cells[i].center_x);
    CHECK(again.cells[i].radius == spec.cells[i].radius);
    CHECK(again.cells[i].kind == spec.cells[i].kind);
  }
  const auto truth = json::parse(fixture_truth_json(spec));
  CHECK(truth["num_total"] == 12);
  CHECK(truth["num_pos"] == 5);
  CHECK(truth["percent_pos"].get<double>() == doctest::Approx(500.0 / 12.0));
  CHECK(truth["cells"][0]["area"] == disk_area(spec.cells[0].radius));
  CHECK_THROWS_AS(parse_fixture_spec("{\"width\": 10}"), Error);
  CHECK_THROWS_AS(parse_fixture_spec("not json"), Error);
  CHECK_THROWS_AS(parse_fixture_spec(R"({"width":64,"height":64,"cells":[{"center":[30,30],"radius":5,"kind":"eosin"}]})"),
                  Error);
}

TEST_CASE("end-to-end oracle: default pipeline recovers K and P") {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 12; ++i) {
    const int total = 1 + static_cast<int>(rng() % 40);
    const int pos = static_cast<int>(rng() % (total + 1));
    const auto spec = random_fixture_spec(total, pos, rng(), {400, 400, 4, 20, 10000});
    const auto q = run_default(render_fixture(spec));
    CAPTURE(total);
    CAPTURE(pos);
    CHECK(q.num_total == total);
    CHECK(q.num_pos == pos);
  }
}

TEST_CASE("hand-written spec with extreme radii") {
  FixtureSpec s;
  s.width = 120;
  s.height = 60;
  s.cells = {{10, 10, 4, StainKind::kDab}, {60, 30, 20, StainKind::kHematoxylin},
             {10, 30, 4, StainKind::kHematoxylin}, {105, 45, 4, StainKind::kDab}};
  s.validate();
  CHECK(run_default(render_fixture(s)) == QuantResult{4, 2, 50.0});
}

}  // TEST_SUITE
