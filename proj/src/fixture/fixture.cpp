#include "pathoquant/fixture.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <random>

#include "pathoquant/error.hpp"

namespace pq {

namespace {

using nlohmann::json;

std::string_view kind_name(StainKind k) {
  return k == StainKind::kDab ? "dab" : "hematoxylin";
}

StainKind parse_kind(const std::string& s) {
  if (s == "dab") return StainKind::kDab;
  if (s == "hematoxylin") return StainKind::kHematoxylin;
  throw Error(ErrorCode::kInvalidParameter, "unknown cell kind '" + s + "'");
}

bool separated(const FixtureCell& a, const FixtureCell& b) {
  const double dx = a.center_x - b.center_x;
  const double dy = a.center_y - b.center_y;
  return std::sqrt(dx * dx + dy * dy) - a.radius - b.radius >= FixtureSpec::kMinSeparation;
}

// Uniform integer in [lo, hi] from raw engine output so the stream is
// identical across standard libraries.
int draw(std::mt19937_64& rng, int lo, int hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo + 1);
  return lo + static_cast<int>(rng() % span);
}

}  // namespace

void FixtureSpec::validate() const {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::kInvalidParameter, "fixture dimensions must be positive");
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const FixtureCell& c = cells[i];
    if (c.radius < kMinRadius || c.radius > kMaxRadius) {
      throw Error(ErrorCode::kInvalidParameter,
                  "cell " + std::to_string(i) + " radius must be in [4, 20]");
    }
    if (c.center_x - c.radius < 0 || c.center_y - c.radius < 0 ||
        c.center_x + c.radius > width - 1 || c.center_y + c.radius > height - 1) {
      throw Error(ErrorCode::kInvalidParameter,
                  "cell " + std::to_string(i) + " is not fully inside the image");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (!separated(c, cells[j])) {
        throw Error(ErrorCode::kInvalidParameter, "cells " + std::to_string(j) + " and " +
                                                      std::to_string(i) +
                                                      " are closer than 4 px edge to edge");
      }
    }
  }
}

FixtureSpec random_fixture_spec(int total, int positive, std::uint64_t seed,
                                const RandomFixtureOptions& options) {
  if (total < 0 || positive < 0 || positive > total) {
    throw Error(ErrorCode::kInvalidParameter, "need 0 <= positive <= total");
  }
  if (options.min_radius < FixtureSpec::kMinRadius ||
      options.max_radius > FixtureSpec::kMaxRadius || options.min_radius > options.max_radius) {
    throw Error(ErrorCode::kInvalidParameter, "radius range must lie within [4, 20]");
  }
  FixtureSpec spec;
  spec.width = options.width;
  spec.height = options.height;
  spec.seed = seed;
  std::mt19937_64 rng(seed);

  for (int k = 0; k < total; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < options.max_attempts && !placed; ++attempt) {
      FixtureCell c;
      c.radius = draw(rng, options.min_radius, options.max_radius);
      if (2 * c.radius + 1 > spec.width || 2 * c.radius + 1 > spec.height) continue;
      c.center_x = draw(rng, c.radius, spec.width - 1 - c.radius);
      c.center_y = draw(rng, c.radius, spec.height - 1 - c.radius);
      placed = std::all_of(spec.cells.begin(), spec.cells.end(),
                           [&](const FixtureCell& o) { return separated(c, o); });
      if (placed) spec.cells.push_back(c);
    }
    if (!placed) {
      throw Error(ErrorCode::kInvalidParameter,
                  "infeasible packing: could not place disk " + std::to_string(k + 1) + " of " +
                      std::to_string(total) + " after " + std::to_string(options.max_attempts) +
                      " attempts");
    }
  }

  // Partial Fisher-Yates picks which disks carry DAB.
  std::vector<std::size_t> order(spec.cells.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int i = 0; i < positive; ++i) {
    const int j = draw(rng, i, total - 1);
    std::swap(order[i], order[j]);
    spec.cells[order[i]].kind = StainKind::kDab;
  }
  return spec;
}

std::int64_t disk_area(int radius) {
  std::int64_t n = 0;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      if (dx * dx + dy * dy <= radius * radius) ++n;
    }
  }
  return n;
}

RasterImage render_fixture(const FixtureSpec& spec, const StainMatrix& stains) {
  spec.validate();
  auto stain_color = [](const Vec3& v) {
    std::array<std::uint8_t, 3> rgb{};
    for (int c = 0; c < 3; ++c) {
      rgb[c] = static_cast<std::uint8_t>(std::lround(255.0 * std::pow(10.0, -v[c])));
    }
    return rgb;
  };
  const auto hema = stain_color(stains.hema());
  const auto dab = stain_color(stains.dab());

  RasterImage img(spec.width, spec.height,
                  std::vector<std::uint8_t>(static_cast<std::size_t>(spec.width) * spec.height * 3,
                                            255));
  for (const FixtureCell& c : spec.cells) {
    const auto color = c.kind == StainKind::kDab ? dab : hema;
    for (int dy = -c.radius; dy <= c.radius; ++dy) {
      for (int dx = -c.radius; dx <= c.radius; ++dx) {
        if (dx * dx + dy * dy <= c.radius * c.radius) {
          img.set(c.center_x + dx, c.center_y + dy, color);
        }
      }
    }
  }
  return img;
}

FixtureSpec parse_fixture_spec(std::string_view json_text) {
  FixtureSpec spec;
  try {
    const json j = json::parse(json_text);
    spec.width = j.at("width").get<int>();
    spec.height = j.at("height").get<int>();
    spec.seed = j.value("seed", std::uint64_t{0});
    for (const json& c : j.at("cells")) {
      FixtureCell cell;
      const json& center = c.at("center");
      cell.center_x = center.at(0).get<int>();
      cell.center_y = center.at(1).get<int>();
      cell.radius = c.at("radius").get<int>();
      cell.kind = parse_kind(c.value("kind", std::string("hematoxylin")));
      spec.cells.push_back(cell);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidParameter, std::string("invalid fixture spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

std::string fixture_spec_to_json(const FixtureSpec& spec) {
  json cells = json::array();
  for (const FixtureCell& c : spec.cells) {
    cells.push_back({{"center", {c.center_x, c.center_y}},
                     {"radius", c.radius},
                     {"kind", kind_name(c.kind)}});
  }
  return json{{"width", spec.width}, {"height", spec.height}, {"seed", spec.seed}, {"cells", cells}}
      .dump(2);
}

std::string fixture_truth_json(const FixtureSpec& spec) {
  json cells = json::array();
  std::int64_t positive = 0;
  for (const FixtureCell& c : spec.cells) {
    if (c.kind == StainKind::kDab) ++positive;
    cells.push_back({{"center", {c.center_x, c.center_y}},
                     {"radius", c.radius},
                     {"area", disk_area(c.radius)},
                     {"kind", kind_name(c.kind)}});
  }
  const auto total = static_cast<std::int64_t>(spec.cells.size());
  const double percent = total > 0 ? 100.0 * static_cast<double>(positive) / total : 0.0;
  return json{{"num_total", total}, {"num_pos", positive}, {"percent_pos", percent}, {"cells", cells}}
      .dump(2);
}

}  // namespace pq
