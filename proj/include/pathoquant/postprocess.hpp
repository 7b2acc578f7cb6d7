#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pathoquant/imaging.hpp"
#include "pathoquant/inference.hpp"

namespace pq {

/// User-adjustable segmentation knobs. Areas are in pixels at canonical
/// (20x) scale.
struct PostprocessParams {
  double seg_threshold = 0.5;
  double size_gate_min = 20.0;
  std::optional<double> size_gate_max;
  double marker_threshold = 0.5;

  /// Throws InvalidParameter for out-of-range values and InvalidGate when
  /// size_gate_max < size_gate_min.
  void validate() const;

  bool operator==(const PostprocessParams&) const = default;
};

struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> values;  // 0 or 1

  bool at(int x, int y) const noexcept {
    return values[static_cast<std::size_t>(y) * width + x] != 0;
  }
  std::size_t count() const noexcept;
};

/// Per-pixel component labels; 0 is background and positive labels are
/// contiguous 1..count, each 8-connected.
struct LabelMap {
  int width = 0;
  int height = 0;
  std::int32_t count = 0;
  std::vector<std::int32_t> labels;

  std::int32_t at(int x, int y) const noexcept {
    return labels[static_cast<std::size_t>(y) * width + x];
  }
  bool operator==(const LabelMap&) const = default;
};

enum class CellClass { kPositive, kNegative };

struct CellRecord {
  std::int32_t id = 0;
  std::int64_t area = 0;
  double centroid_x = 0.0;
  double centroid_y = 0.0;
  double mean_pos_score = 0.0;
  CellClass cell_class = CellClass::kNegative;

  bool positive() const noexcept { return cell_class == CellClass::kPositive; }
  bool operator==(const CellRecord&) const = default;
};

struct QuantResult {
  std::int64_t num_total = 0;
  std::int64_t num_pos = 0;
  double percent_pos = 0.0;

  bool operator==(const QuantResult&) const = default;
};

struct ChannelWindow {
  bool enabled = true;
  double lo = 0.0;
  double hi = 1.0;
};

struct ChannelView {
  ChannelWindow marker;
  ChannelWindow dapi;
  ChannelWindow lap2;
};

/// Foreground where fg_prob >= t.
BinaryMask threshold_mask(const Plane& fg_prob, double t);

/// 8-connected two-pass union-find labeling; labels follow raster order of
/// each component's first pixel.
LabelMap label_components(const BinaryMask& mask);

/// Drops components with area < min_area or > max_area and renumbers the
/// survivors contiguously in their original order.
LabelMap size_gate(const LabelMap& lm, double min_area, std::optional<double> max_area);

std::vector<CellRecord> classify_cells(const LabelMap& lm, const Plane& pos_score,
                                       double marker_threshold);

QuantResult quantify(std::span<const CellRecord> cells);

/// Positive cells red, negative cells blue, background black.
RasterImage render_seg_image(const LabelMap& lm, std::span<const CellRecord> cells);

/// Draws cell outlines over `original`. The canonical-scale label map is
/// nearest-neighbour resampled to the original size first; a boundary
/// pixel is a labelled pixel with a 4-neighbour (or the image edge) of a
/// different label.
RasterImage render_overlay(const RasterImage& original, const LabelMap& lm,
                           std::span<const CellRecord> cells, double canonical_scale);

/// R = marker, G = lap2, B = dapi, each windowed to 8 bits.
RasterImage composite_multiplex(const ModalitySet& m, const ChannelView& view);

struct PostprocessResult {
  LabelMap labels;
  std::vector<CellRecord> cells;
  QuantResult quant;
};

PostprocessResult postprocess(const SegScores& seg, const PostprocessParams& params);

/// Rounds both score planes to the 8-bit grid used on the wire.
SegScores quantize_seg_scores(const SegScores& seg);

/// Wire packing of segmentation scores: R = round(255 * pos_score),
/// G = 0, B = round(255 * fg_prob).
RasterImage pack_seg_raw(const SegScores& seg);
SegScores unpack_seg_raw(const RasterImage& packed);

/// Canonical scale implied by an original size and its seg_raw size, if it
/// is one of the supported factors.
std::optional<double> infer_canonical_scale(int original_width, int original_height,
                                            int canonical_width, int canonical_height);

}  // namespace pq
