#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "pathoquant/error.hpp"
#include "pathoquant/inference.hpp"

namespace pq {

namespace {

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 unit(const Vec3& v, const char* name) {
  const double n = std::sqrt(dot(v, v));
  if (!std::isfinite(n) || n <= 0.0) {
    throw Error(ErrorCode::kDegenerateStains, std::string(name) + " stain vector is zero");
  }
  return {v[0] / n, v[1] / n, v[2] / n};
}

constexpr double kMinAngleDegrees = 1.0;

}  // namespace

StainMatrix::StainMatrix(const Vec3& hema, const Vec3& dab)
    : hema_(unit(hema, "hematoxylin")), dab_(unit(dab, "DAB")) {
  const double c = dot(hema_, dab_);
  const double angle = std::acos(std::clamp(std::abs(c), 0.0, 1.0)) * 180.0 / std::numbers::pi;
  if (!(angle > kMinAngleDegrees)) {
    throw Error(ErrorCode::kDegenerateStains,
                "stain vectors are " + std::to_string(angle) + " degrees apart (need > 1)");
  }
  // (M^T M)^-1 M^T for M = [hema dab] with unit columns.
  const double det = 1.0 - c * c;
  for (int k = 0; k < 3; ++k) {
    pinv_[0][k] = (hema_[k] - c * dab_[k]) / det;
    pinv_[1][k] = (dab_[k] - c * hema_[k]) / det;
  }
}

StainMatrix StainMatrix::standard_hdab() {
  return StainMatrix({0.650, 0.704, 0.286}, {0.269, 0.568, 0.776});
}

StainConcentrations StainMatrix::unmix(const Vec3& od) const noexcept {
  const double h = dot(pinv_[0], od);
  const double d = dot(pinv_[1], od);
  return {std::max(h, 0.0), std::max(d, 0.0)};
}

DeconvolvedPlanes deconvolve(const RasterImage& img, const StainMatrix& stains) {
  std::array<double, 256> od_table{};
  for (int i = 0; i < 256; ++i) od_table[i] = optical_density(i);

  DeconvolvedPlanes out{ODPlane(img.width(), img.height()), ODPlane(img.width(), img.height())};
  const auto px = img.pixels();
  auto hema = out.hema.values();
  auto dab = out.dab.values();
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const Vec3 od = {od_table[px[i * 3]], od_table[px[i * 3 + 1]], od_table[px[i * 3 + 2]]};
    const StainConcentrations c = stains.unmix(od);
    hema[i] = static_cast<float>(c.hema);
    dab[i] = static_cast<float>(c.dab);
  }
  return out;
}

}  // namespace pq
