#include <algorithm>
#include <cmath>
#include <string>

#include "pathoquant/error.hpp"
#include "pathoquant/postprocess.hpp"

namespace pq {

void PostprocessParams::validate() const {
  auto unit_interval = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(ErrorCode::kInvalidParameter, std::string(name) + " must be in [0,1]");
    }
  };
  unit_interval(seg_threshold, "seg_threshold");
  unit_interval(marker_threshold, "marker_threshold");
  if (!(size_gate_min >= 0.0) || !std::isfinite(size_gate_min)) {
    throw Error(ErrorCode::kInvalidParameter, "size_gate_min must be a finite value >= 0");
  }
  if (size_gate_max && !(*size_gate_max >= size_gate_min)) {
    throw Error(ErrorCode::kInvalidGate, "size_gate_max must be >= size_gate_min");
  }
}

std::vector<CellRecord> classify_cells(const LabelMap& lm, const Plane& pos_score,
                                       double marker_threshold) {
  if (lm.width != pos_score.width() || lm.height != pos_score.height()) {
    throw Error(ErrorCode::kDimensionMismatch, "label map and score plane differ in size");
  }
  struct Accum {
    std::int64_t area = 0;
    double sx = 0.0;
    double sy = 0.0;
    double score = 0.0;
  };
  std::vector<Accum> acc(static_cast<std::size_t>(lm.count) + 1);
  for (int y = 0; y < lm.height; ++y) {
    for (int x = 0; x < lm.width; ++x) {
      const std::int32_t l = lm.at(x, y);
      if (l == 0) continue;
      Accum& a = acc[l];
      ++a.area;
      a.sx += x;
      a.sy += y;
      a.score += pos_score(x, y);
    }
  }
  std::vector<CellRecord> cells;
  cells.reserve(lm.count);
  for (std::int32_t l = 1; l <= lm.count; ++l) {
    const Accum& a = acc[l];
    const double n = static_cast<double>(a.area);
    CellRecord c;
    c.id = l;
    c.area = a.area;
    c.centroid_x = a.sx / n;
    c.centroid_y = a.sy / n;
    c.mean_pos_score = a.score / n;
    c.cell_class = c.mean_pos_score >= marker_threshold ? CellClass::kPositive : CellClass::kNegative;
    cells.push_back(c);
  }
  return cells;
}

QuantResult quantify(std::span<const CellRecord> cells) {
  QuantResult q;
  q.num_total = static_cast<std::int64_t>(cells.size());
  q.num_pos = std::count_if(cells.begin(), cells.end(),
                            [](const CellRecord& c) { return c.positive(); });
  q.percent_pos = q.num_total > 0 ? 100.0 * static_cast<double>(q.num_pos) /
                                        static_cast<double>(q.num_total)
                                  : 0.0;
  return q;
}

PostprocessResult postprocess(const SegScores& seg, const PostprocessParams& params) {
  params.validate();
  if (!seg.fg_prob.same_shape(seg.pos_score)) {
    throw Error(ErrorCode::kDimensionMismatch, "fg_prob and pos_score differ in size");
  }
  PostprocessResult r;
  r.labels = size_gate(label_components(threshold_mask(seg.fg_prob, params.seg_threshold)),
                       params.size_gate_min, params.size_gate_max);
  r.cells = classify_cells(r.labels, seg.pos_score, params.marker_threshold);
  r.quant = quantify(r.cells);
  return r;
}

SegScores quantize_seg_scores(const SegScores& seg) {
  auto requantize = [](const Plane& p) {
    const auto q = quantize_plane(p);
    Plane out(p.width(), p.height());
    auto dst = out.values();
    for (std::size_t i = 0; i < q.size(); ++i) dst[i] = static_cast<float>(q[i]) / 255.0f;
    return out;
  };
  return {requantize(seg.fg_prob), requantize(seg.pos_score)};
}

RasterImage pack_seg_raw(const SegScores& seg) {
  if (!seg.fg_prob.same_shape(seg.pos_score)) {
    throw Error(ErrorCode::kDimensionMismatch, "fg_prob and pos_score differ in size");
  }
  const auto pos = quantize_plane(seg.pos_score);
  const auto fg = quantize_plane(seg.fg_prob);
  RasterImage out(seg.fg_prob.width(), seg.fg_prob.height());
  auto px = out.pixels();
  for (std::size_t i = 0; i < pos.size(); ++i) {
    px[i * 3] = pos[i];
    px[i * 3 + 1] = 0;
    px[i * 3 + 2] = fg[i];
  }
  return out;
}

SegScores unpack_seg_raw(const RasterImage& packed) {
  SegScores seg{Plane(packed.width(), packed.height()), Plane(packed.width(), packed.height())};
  const auto px = packed.pixels();
  auto pos = seg.pos_score.values();
  auto fg = seg.fg_prob.values();
  for (std::size_t i = 0; i < packed.pixel_count(); ++i) {
    pos[i] = static_cast<float>(px[i * 3]) / 255.0f;
    fg[i] = static_cast<float>(px[i * 3 + 2]) / 255.0f;
  }
  return seg;
}

std::optional<double> infer_canonical_scale(int original_width, int original_height,
                                            int canonical_width, int canonical_height) {
  for (double s : {1.0, 0.5, 2.0}) {
    if (std::llround(original_width * s) == canonical_width &&
        std::llround(original_height * s) == canonical_height) {
      return s;
    }
  }
  return std::nullopt;
}

}  // namespace pq
