#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "pathoquant/imaging.hpp"
#include "pathoquant/inference.hpp"

namespace pq {

enum class StainKind { kHematoxylin, kDab };

struct FixtureCell {
  int center_x = 0;
  int center_y = 0;
  int radius = 4;
  StainKind kind = StainKind::kHematoxylin;
};

/// Ground-truth synthetic slide: stained disks on white.
struct FixtureSpec {
  int width = 1024;
  int height = 1024;
  std::uint64_t seed = 0;
  std::vector<FixtureCell> cells;

  static constexpr int kMinRadius = 4;
  static constexpr int kMaxRadius = 20;
  static constexpr double kMinSeparation = 4.0;

  /// Radii in [4,20], disks fully inside the image, pairwise edge-to-edge
  /// separation >= 4 px. Throws InvalidParameter.
  void validate() const;
};

struct RandomFixtureOptions {
  int width = 1024;
  int height = 1024;
  int min_radius = 5;
  int max_radius = 10;
  int max_attempts = 10000;
};

/// Rejection-samples `total` disks, `positive` of them DAB. Throws
/// InvalidParameter when positive > total or a disk cannot be placed within
/// max_attempts draws.
FixtureSpec random_fixture_spec(int total, int positive, std::uint64_t seed,
                                const RandomFixtureOptions& options = {});

/// Disk pixels get I_c = round(255 * 10^(-v_c)) for the stain vector v of
/// their kind (unit concentration); everything else is white.
RasterImage render_fixture(const FixtureSpec& spec,
                           const StainMatrix& stains = StainMatrix::standard_hdab());

/// Pixel count of a rasterized disk of the given radius.
std::int64_t disk_area(int radius);

FixtureSpec parse_fixture_spec(std::string_view json_text);
std::string fixture_spec_to_json(const FixtureSpec& spec);
/// {num_total, num_pos, percent_pos, cells: [{center, radius, area, kind}]}
std::string fixture_truth_json(const FixtureSpec& spec);

}  // namespace pq
