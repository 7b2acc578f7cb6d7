#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "pathoquant/error.hpp"
#include "pathoquant/inference.hpp"

namespace pq {

TilePlan plan_tiles(int width, int height, int tile_size, int overlap) {
  if (width < 1 || height < 1 || overlap < 0 || tile_size <= 2 * overlap) {
    throw Error(ErrorCode::kInvalidTileGeometry,
                "need width,height >= 1, overlap >= 0 and tile_size > 2*overlap (got tile " +
                    std::to_string(tile_size) + ", overlap " + std::to_string(overlap) + ")");
  }
  auto spans = [&](int extent) {
    std::vector<std::pair<int, int>> out;  // (start, length)
    if (extent <= tile_size) {
      out.emplace_back(0, extent);
      return out;
    }
    const int step = tile_size - 2 * overlap;
    for (int start = 0; start < extent; start += step) {
      out.emplace_back(start, std::min(step, extent - start));
    }
    return out;
  };

  TilePlan plan{tile_size, overlap, {}};
  const auto xs = spans(width);
  const auto ys = spans(height);
  plan.tiles.reserve(xs.size() * ys.size());
  for (const auto& [cy, ch] : ys) {
    for (const auto& [cx, cw] : xs) {
      const int sx = std::max(0, cx - overlap);
      const int sy = std::max(0, cy - overlap);
      const int ex = std::min(width, cx + cw + overlap);
      const int ey = std::min(height, cy + ch + overlap);
      plan.tiles.push_back({Rect{sx, sy, ex - sx, ey - sy}, Rect{cx, cy, cw, ch}});
    }
  }
  return plan;
}

std::optional<Resolution> parse_resolution(std::string_view text) noexcept {
  if (text == "10x") return Resolution::k10x;
  if (text == "20x") return Resolution::k20x;
  if (text == "40x") return Resolution::k40x;
  return std::nullopt;
}

std::string_view to_string(Resolution r) noexcept {
  switch (r) {
    case Resolution::k10x: return "10x";
    case Resolution::k20x: return "20x";
    case Resolution::k40x: return "40x";
  }
  return "20x";
}

double canonical_scale(Resolution r) noexcept {
  switch (r) {
    case Resolution::k10x: return 2.0;
    case Resolution::k20x: return 1.0;
    case Resolution::k40x: return 0.5;
  }
  return 1.0;
}

ReferenceBackend::ReferenceBackend(StainMatrix stains, NormalizationOptions options)
    : stains_(std::move(stains)), options_(options) {}

ReferenceBackend::ReferenceBackend(StainMatrix stains, NormalizationOptions options,
                                   ModalityScales scales)
    : stains_(std::move(stains)), options_(options), fixed_scales_(scales) {}

BackendOutput ReferenceBackend::run(const RasterImage& img) const {
  const ModalityScales scales =
      fixed_scales_ ? *fixed_scales_ : measure_modality_scales(img, stains_, options_);
  BackendOutput out;
  out.modalities = synthesize_modalities(img, stains_, scales);
  out.seg = compute_seg_scores(out.modalities);
  return out;
}

std::unique_ptr<const InferenceBackend> ReferenceBackend::bind(const RasterImage& whole) const {
  return std::unique_ptr<const InferenceBackend>(
      new ReferenceBackend(stains_, options_, measure_modality_scales(whole, stains_, options_)));
}

BackendOutput NullBackend::run(const RasterImage& img) const {
  Plane dapi(img.width(), img.height());
  Plane marker(img.width(), img.height());
  const auto px = img.pixels();
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const double r = px[i * 3];
    const double g = px[i * 3 + 1];
    const double b = px[i * 3 + 2];
    dapi.values()[i] = static_cast<float>(1.0 - (0.299 * r + 0.587 * g + 0.114 * b) / 255.0);
    marker.values()[i] = static_cast<float>(std::clamp((r - (g + b) / 2.0) / 255.0, 0.0, 1.0));
  }
  BackendOutput out;
  out.modalities = {dapi, dapi, Plane(img.width(), img.height()), marker};
  out.seg = {dapi, marker};
  return out;
}

namespace {

RasterImage crop(const RasterImage& img, const Rect& r) {
  std::vector<std::uint8_t> px(static_cast<std::size_t>(r.width) * r.height * 3);
  const auto src = img.pixels();
  const std::size_t src_stride = static_cast<std::size_t>(img.width()) * 3;
  const std::size_t dst_stride = static_cast<std::size_t>(r.width) * 3;
  for (int y = 0; y < r.height; ++y) {
    std::copy_n(src.begin() + (r.y + y) * src_stride + r.x * 3, dst_stride,
                px.begin() + y * dst_stride);
  }
  return RasterImage(r.width, r.height, std::move(px));
}

// Copies the core region of a tile-local plane into the full-size plane.
void paste_core(const Plane& tile_plane, const Tile& tile, Plane& dst) {
  const int ox = tile.core.x - tile.source.x;
  const int oy = tile.core.y - tile.source.y;
  for (int y = 0; y < tile.core.height; ++y) {
    for (int x = 0; x < tile.core.width; ++x) {
      dst(tile.core.x + x, tile.core.y + y) = tile_plane(ox + x, oy + y);
    }
  }
}

std::string describe(const Rect& r) {
  return "(" + std::to_string(r.x) + "," + std::to_string(r.y) + " " + std::to_string(r.width) +
         "x" + std::to_string(r.height) + ")";
}

}  // namespace

InferenceOutput infer(const RasterImage& img, Resolution resolution,
                      const InferenceBackend& backend, const InferOptions& options) {
  const double scale = canonical_scale(resolution);
  const RasterImage canonical = scale == 1.0 ? img : rescale(img, scale);
  const int w = canonical.width();
  const int h = canonical.height();
  const TilePlan plan = plan_tiles(w, h, options.tile_size, options.overlap);

  const std::unique_ptr<const InferenceBackend> bound = backend.bind(canonical);
  const InferenceBackend& engine = bound ? *bound : backend;

  InferenceOutput out;
  out.canonical_scale = scale;
  out.modalities = {Plane(w, h), Plane(w, h), Plane(w, h), Plane(w, h)};
  out.seg = {Plane(w, h), Plane(w, h)};

  std::atomic<std::size_t> next{0};
  std::mutex failure_mutex;
  std::exception_ptr failure;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= plan.tiles.size()) return;
      {
        std::lock_guard lock(failure_mutex);
        if (failure) return;
      }
      const Tile& tile = plan.tiles[i];
      try {
        const BackendOutput result =
            plan.tiles.size() == 1 ? engine.run(canonical) : engine.run(crop(canonical, tile.source));
        const Plane* planes[] = {&result.modalities.hema, &result.modalities.dapi,
                                 &result.modalities.lap2, &result.modalities.marker,
                                 &result.seg.fg_prob,     &result.seg.pos_score};
        for (const Plane* p : planes) {
          if (p->width() != tile.source.width || p->height() != tile.source.height) {
            throw Error(ErrorCode::kBackendFailure, "backend output size differs from its input");
          }
        }
        // Cores are disjoint, so concurrent pastes never touch the same pixel.
        paste_core(result.modalities.hema, tile, out.modalities.hema);
        paste_core(result.modalities.dapi, tile, out.modalities.dapi);
        paste_core(result.modalities.lap2, tile, out.modalities.lap2);
        paste_core(result.modalities.marker, tile, out.modalities.marker);
        paste_core(result.seg.fg_prob, tile, out.seg.fg_prob);
        paste_core(result.seg.pos_score, tile, out.seg.pos_score);
      } catch (const std::exception& e) {
        std::lock_guard lock(failure_mutex);
        if (!failure) {
          failure = std::make_exception_ptr(Error(
              ErrorCode::kBackendFailure,
              "backend failed on tile " + describe(tile.source) + ": " + e.what()));
        }
        return;
      }
    }
  };

  const int threads = std::clamp(options.parallelism, 1, static_cast<int>(plan.tiles.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace pq
