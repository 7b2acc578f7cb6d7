#include <algorithm>
#include <cmath>
#include <string>

#include "pathoquant/error.hpp"
#include "pathoquant/postprocess.hpp"

namespace pq {

namespace {

constexpr std::array<std::uint8_t, 3> kPositiveColor = {255, 0, 0};
constexpr std::array<std::uint8_t, 3> kNegativeColor = {0, 0, 255};

std::vector<std::uint8_t> positivity_by_label(const LabelMap& lm,
                                              std::span<const CellRecord> cells) {
  std::vector<std::uint8_t> positive(static_cast<std::size_t>(lm.count) + 1, 0);
  for (const CellRecord& c : cells) {
    if (c.id < 1 || c.id > lm.count) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "cell id " + std::to_string(c.id) + " is not in the label map");
    }
    positive[c.id] = c.positive() ? 1 : 0;
  }
  return positive;
}

LabelMap resample_nearest(const LabelMap& lm, int width, int height) {
  if (lm.width == width && lm.height == height) return lm;
  LabelMap out{width, height, lm.count, std::vector<std::int32_t>(
                                            static_cast<std::size_t>(width) * height)};
  std::vector<int> src_x(width);
  for (int x = 0; x < width; ++x) {
    src_x[x] = std::min(lm.width - 1, static_cast<int>(static_cast<long long>(x) * lm.width / width));
  }
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(lm.height - 1,
                            static_cast<int>(static_cast<long long>(y) * lm.height / height));
    for (int x = 0; x < width; ++x) {
      out.labels[static_cast<std::size_t>(y) * width + x] = lm.at(src_x[x], sy);
    }
  }
  return out;
}

std::uint8_t window(float v, const ChannelWindow& w) {
  if (!w.enabled) return 0;
  const double t = std::clamp((static_cast<double>(v) - w.lo) / (w.hi - w.lo), 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(255.0 * t + 0.5));
}

void check_window(const ChannelWindow& w, const char* name) {
  if (!w.enabled) return;
  if (!(w.lo >= 0.0 && w.hi <= 1.0 && w.lo < w.hi)) {
    throw Error(ErrorCode::kInvalidWindow,
                std::string(name) + " window must satisfy 0 <= lo < hi <= 1");
  }
}

}  // namespace

RasterImage render_seg_image(const LabelMap& lm, std::span<const CellRecord> cells) {
  const auto positive = positivity_by_label(lm, cells);
  RasterImage out(lm.width, lm.height);
  for (int y = 0; y < lm.height; ++y) {
    for (int x = 0; x < lm.width; ++x) {
      const std::int32_t l = lm.at(x, y);
      if (l == 0) continue;
      out.set(x, y, positive[l] ? kPositiveColor : kNegativeColor);
    }
  }
  return out;
}

RasterImage render_overlay(const RasterImage& original, const LabelMap& lm,
                           std::span<const CellRecord> cells, double canonical_scale) {
  if (std::llround(original.width() * canonical_scale) != lm.width ||
      std::llround(original.height() * canonical_scale) != lm.height) {
    throw Error(ErrorCode::kDimensionMismatch,
                "original image size does not match the label map at scale " +
                    std::to_string(canonical_scale));
  }
  const auto positive = positivity_by_label(lm, cells);
  const LabelMap up = resample_nearest(lm, original.width(), original.height());

  RasterImage out = original;
  const int w = up.width;
  const int h = up.height;
  auto label_or_edge = [&](int x, int y) -> std::int32_t {
    if (x < 0 || y < 0 || x >= w || y >= h) return 0;
    return up.at(x, y);
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::int32_t l = up.at(x, y);
      if (l == 0) continue;
      const bool boundary = label_or_edge(x - 1, y) != l || label_or_edge(x + 1, y) != l ||
                            label_or_edge(x, y - 1) != l || label_or_edge(x, y + 1) != l;
      if (boundary) out.set(x, y, positive[l] ? kPositiveColor : kNegativeColor);
    }
  }
  return out;
}

RasterImage composite_multiplex(const ModalitySet& m, const ChannelView& view) {
  check_window(view.marker, "marker");
  check_window(view.dapi, "dapi");
  check_window(view.lap2, "lap2");
  if (!m.consistent()) {
    throw Error(ErrorCode::kDimensionMismatch, "modality planes differ in size");
  }
  RasterImage out(m.width(), m.height());
  auto px = out.pixels();
  const auto marker = m.marker.values();
  const auto lap2 = m.lap2.values();
  const auto dapi = m.dapi.values();
  for (std::size_t i = 0; i < marker.size(); ++i) {
    px[i * 3] = window(marker[i], view.marker);
    px[i * 3 + 1] = window(lap2[i], view.lap2);
    px[i * 3 + 2] = window(dapi[i], view.dapi);
  }
  return out;
}

}  // namespace pq
