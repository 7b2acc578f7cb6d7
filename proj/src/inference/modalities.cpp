#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "pathoquant/error.hpp"
#include "pathoquant/inference.hpp"

namespace pq {

namespace {

int clamp_index(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

// Normalized 1-D Gaussian taps for sigma = 1, radius 2.
std::array<double, 5> gaussian_taps() {
  std::array<double, 5> k{};
  double sum = 0.0;
  for (int i = -2; i <= 2; ++i) {
    k[i + 2] = std::exp(-0.5 * i * i);
    sum += k[i + 2];
  }
  for (double& v : k) v /= sum;
  return k;
}

}  // namespace

double positive_percentile(const ScalarPlane& plane, double percentile) {
  std::vector<float> positive;
  positive.reserve(plane.size() / 4);
  for (float v : plane.values()) {
    if (v > 0.0f) positive.push_back(v);
  }
  if (positive.empty()) return 0.0;

  const double rank = percentile / 100.0 * static_cast<double>(positive.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, positive.size() - 1);
  std::nth_element(positive.begin(), positive.begin() + lo, positive.end());
  const double lo_value = positive[lo];
  double hi_value = lo_value;
  if (hi != lo) {
    hi_value = *std::min_element(positive.begin() + hi, positive.end());
  }
  return lo_value + (rank - static_cast<double>(lo)) * (hi_value - lo_value);
}

double normalization_scale(const ODPlane& plane, const NormalizationOptions& options) {
  const double p = positive_percentile(plane, options.percentile);
  if (p <= 0.0) return 0.0;
  return std::max(p, options.min_scale);
}

Plane normalize_by_scale(const ODPlane& plane, double scale) {
  Plane out(plane.width(), plane.height());
  if (!(scale > 0.0)) return out;
  const auto in = plane.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < in.size(); ++i) {
    dst[i] = static_cast<float>(std::clamp(static_cast<double>(in[i]) / scale, 0.0, 1.0));
  }
  return out;
}

Plane normalize_concentration(const ODPlane& plane, double percentile, double min_scale) {
  if (!(percentile > 50.0 && percentile <= 100.0)) {
    throw Error(ErrorCode::kInvalidParameter,
                "normalization percentile must be in (50, 100], got " +
                    std::to_string(percentile));
  }
  return normalize_by_scale(plane, normalization_scale(plane, {percentile, min_scale}));
}

bool ModalitySet::consistent() const noexcept {
  return hema.same_shape(dapi) && hema.same_shape(lap2) && hema.same_shape(marker);
}

Plane sobel_magnitude(const Plane& plane) {
  const int w = plane.width();
  const int h = plane.height();
  Plane out(w, h);
  for (int y = 0; y < h; ++y) {
    const int ym = clamp_index(y - 1, h);
    const int yp = clamp_index(y + 1, h);
    for (int x = 0; x < w; ++x) {
      const int xm = clamp_index(x - 1, w);
      const int xp = clamp_index(x + 1, w);
      const double gx = (plane(xp, ym) + 2.0 * plane(xp, y) + plane(xp, yp)) -
                        (plane(xm, ym) + 2.0 * plane(xm, y) + plane(xm, yp));
      const double gy = (plane(xm, yp) + 2.0 * plane(x, yp) + plane(xp, yp)) -
                        (plane(xm, ym) + 2.0 * plane(x, ym) + plane(xp, ym));
      out(x, y) = static_cast<float>(std::sqrt(gx * gx + gy * gy));
    }
  }
  return out;
}

Plane gaussian_smooth_5x5(const Plane& plane) {
  static const std::array<double, 5> k = gaussian_taps();
  const int w = plane.width();
  const int h = plane.height();
  std::vector<double> horizontal(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -2; i <= 2; ++i) acc += k[i + 2] * plane(clamp_index(x + i, w), y);
      horizontal[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  Plane out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -2; i <= 2; ++i) {
        acc += k[i + 2] * horizontal[static_cast<std::size_t>(clamp_index(y + i, h)) * w + x];
      }
      out(x, y) = static_cast<float>(acc);
    }
  }
  return out;
}

ModalityScales measure_modality_scales(const RasterImage& img, const StainMatrix& stains,
                                       const NormalizationOptions& options) {
  const DeconvolvedPlanes conc = deconvolve(img, stains);
  ModalityScales scales;
  scales.hema = normalization_scale(conc.hema, options);
  scales.dab = normalization_scale(conc.dab, options);
  const Plane dapi = normalize_by_scale(conc.hema, scales.hema);
  scales.gradient = normalization_scale(sobel_magnitude(dapi), options);
  return scales;
}

ModalitySet synthesize_modalities(const RasterImage& img, const StainMatrix& stains,
                                  const ModalityScales& scales) {
  const DeconvolvedPlanes conc = deconvolve(img, stains);
  ModalitySet m;
  m.hema = normalize_by_scale(conc.hema, scales.hema);
  m.dapi = m.hema;
  m.marker = normalize_by_scale(conc.dab, scales.dab);
  m.lap2 = normalize_by_scale(sobel_magnitude(m.dapi), scales.gradient);
  return m;
}

ModalitySet synthesize_modalities(const RasterImage& img, const StainMatrix& stains,
                                  const NormalizationOptions& options) {
  return synthesize_modalities(img, stains, measure_modality_scales(img, stains, options));
}

SegScores compute_seg_scores(const ModalitySet& m) {
  if (!m.consistent()) {
    throw Error(ErrorCode::kDimensionMismatch, "modality planes differ in size");
  }
  Plane nuclear(m.width(), m.height());
  const auto dapi = m.dapi.values();
  const auto marker = m.marker.values();
  auto dst = nuclear.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::max(dapi[i], marker[i]);

  SegScores s{gaussian_smooth_5x5(nuclear), m.marker};
  for (float& v : s.fg_prob.values()) v = std::clamp(v, 0.0f, 1.0f);
  return s;
}

}  // namespace pq
