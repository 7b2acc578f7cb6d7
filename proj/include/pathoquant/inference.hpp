#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "pathoquant/imaging.hpp"

namespace pq {

using Vec3 = std::array<double, 3>;

struct StainConcentrations {
  double hema = 0.0;
  double dab = 0.0;
};

/// Hematoxylin and DAB absorbance directions in optical-density space.
/// Construction normalizes both vectors to unit length and precomputes the
/// 2x3 least-squares pseudo-inverse.
class StainMatrix {
 public:
  /// Throws DegenerateStains when a vector is zero/non-finite or the two are
  /// within one degree of each other.
  StainMatrix(const Vec3& hema, const Vec3& dab);

  static StainMatrix standard_hdab();

  const Vec3& hema() const noexcept { return hema_; }
  const Vec3& dab() const noexcept { return dab_; }

  /// Least-squares concentrations for one OD triplet, negatives clamped to 0.
  StainConcentrations unmix(const Vec3& od) const noexcept;

 private:
  Vec3 hema_;
  Vec3 dab_;
  std::array<Vec3, 2> pinv_;
};

struct DeconvolvedPlanes {
  ODPlane hema;
  ODPlane dab;
};

DeconvolvedPlanes deconvolve(const RasterImage& img, const StainMatrix& stains);

struct NormalizationOptions {
  double percentile = 99.0;
  /// Lower bound on the divisor. Keeps trace cross-talk from being stretched
  /// to full scale when a stain is absent from the image.
  double min_scale = 0.25;
};

/// p-th percentile (linear interpolation between order statistics) of the
/// strictly positive values, or 0 when there are none.
double positive_percentile(const ScalarPlane& plane, double percentile);

/// Divisor normalize_concentration would use: 0 for an all-zero plane,
/// otherwise max(percentile, min_scale).
double normalization_scale(const ODPlane& plane, const NormalizationOptions& options = {});

/// Divides by `scale` and clamps to [0,1]; scale 0 yields all zeros.
Plane normalize_by_scale(const ODPlane& plane, double scale);

/// Requires percentile in (50, 100]; throws InvalidParameter otherwise.
Plane normalize_concentration(const ODPlane& plane, double percentile = 99.0,
                              double min_scale = NormalizationOptions{}.min_scale);

struct ModalitySet {
  Plane hema;
  Plane dapi;
  Plane lap2;
  Plane marker;

  int width() const noexcept { return hema.width(); }
  int height() const noexcept { return hema.height(); }
  /// True when all four planes share dimensions.
  bool consistent() const noexcept;
};

struct SegScores {
  Plane fg_prob;
  Plane pos_score;
};

/// Image-level divisors for the three normalized reference channels.
struct ModalityScales {
  double hema = 0.0;
  double dab = 0.0;
  double gradient = 0.0;
};

ModalityScales measure_modality_scales(const RasterImage& img, const StainMatrix& stains,
                                       const NormalizationOptions& options = {});

ModalitySet synthesize_modalities(const RasterImage& img, const StainMatrix& stains,
                                  const NormalizationOptions& options = {});
ModalitySet synthesize_modalities(const RasterImage& img, const StainMatrix& stains,
                                  const ModalityScales& scales);

Plane sobel_magnitude(const Plane& plane);
Plane gaussian_smooth_5x5(const Plane& plane);

SegScores compute_seg_scores(const ModalitySet& m);

struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  bool contains(const Rect& other) const noexcept {
    return other.x >= x && other.y >= y && other.x + other.width <= x + width &&
           other.y + other.height <= y + height;
  }
  bool operator==(const Rect&) const = default;
};

struct Tile {
  Rect source;
  Rect core;
};

struct TilePlan {
  int tile_size = 512;
  int overlap = 64;
  std::vector<Tile> tiles;
};

/// Cores partition the image; each source is its core grown by `overlap`
/// and clipped to the image. Axes no longer than tile_size get one core;
/// longer axes advance by tile_size - 2*overlap so sources never exceed
/// tile_size.
TilePlan plan_tiles(int width, int height, int tile_size = 512, int overlap = 64);

enum class Resolution { k10x, k20x, k40x };

std::optional<Resolution> parse_resolution(std::string_view text) noexcept;
std::string_view to_string(Resolution r) noexcept;
/// Factor that brings an image scanned at `r` to the canonical 20x scale.
double canonical_scale(Resolution r) noexcept;

struct BackendOutput {
  ModalitySet modalities;
  SegScores seg;
};

/// A pure, reentrant mapping from an RGB raster to same-sized modalities
/// and segmentation scores.
class InferenceBackend {
 public:
  virtual ~InferenceBackend() = default;

  virtual BackendOutput run(const RasterImage& img) const = 0;

  /// Called once per image with the full canonical raster before tiling.
  /// Backends with image-global statistics return a copy with those
  /// statistics fixed so every tile sees the same values; nullptr means
  /// the backend is used as is.
  virtual std::unique_ptr<const InferenceBackend> bind(const RasterImage& whole) const {
    (void)whole;
    return nullptr;
  }
};

/// Classical stain-deconvolution backend:
/// deconvolve -> synthesize_modalities -> compute_seg_scores.
class ReferenceBackend final : public InferenceBackend {
 public:
  explicit ReferenceBackend(StainMatrix stains = StainMatrix::standard_hdab(),
                            NormalizationOptions options = {});

  BackendOutput run(const RasterImage& img) const override;
  std::unique_ptr<const InferenceBackend> bind(const RasterImage& whole) const override;

  const StainMatrix& stains() const noexcept { return stains_; }

 private:
  ReferenceBackend(StainMatrix stains, NormalizationOptions options, ModalityScales scales);

  StainMatrix stains_;
  NormalizationOptions options_;
  std::optional<ModalityScales> fixed_scales_;
};

/// Deterministic backend for tests: dapi = hema = luminance complement,
/// marker = red excess, lap2 = 0, fg_prob = dapi, pos_score = marker.
class NullBackend final : public InferenceBackend {
 public:
  BackendOutput run(const RasterImage& img) const override;
};

struct InferOptions {
  int tile_size = 512;
  int overlap = 64;
  /// Upper bound on concurrently processed tiles.
  int parallelism = 1;
};

struct InferenceOutput {
  ModalitySet modalities;
  SegScores seg;
  double canonical_scale = 1.0;
};

InferenceOutput infer(const RasterImage& img, Resolution resolution,
                      const InferenceBackend& backend, const InferOptions& options = {});

}  // namespace pq
