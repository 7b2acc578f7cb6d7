#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "pathoquant/error.hpp"
#include "pathoquant/imaging.hpp"

namespace pq {

namespace {

struct Tap {
  int lo;
  int hi;
  double t;
};

std::vector<Tap> bilinear_taps(int in, int out) {
  std::vector<Tap> taps(static_cast<std::size_t>(out));
  const double step = static_cast<double>(in) / static_cast<double>(out);
  for (int i = 0; i < out; ++i) {
    const double src = std::min(i * step, static_cast<double>(in - 1));
    const int lo = static_cast<int>(std::floor(src));
    taps[i] = {lo, std::min(lo + 1, in - 1), src - lo};
  }
  return taps;
}

void check_target(int w, int h) {
  if (w < 1 || h < 1) {
    throw Error(ErrorCode::kInvalidScale,
                "resampled size " + std::to_string(w) + "x" + std::to_string(h) +
                    " is empty");
  }
}

}  // namespace

RasterImage resize_bilinear(const RasterImage& img, int out_width, int out_height) {
  check_target(out_width, out_height);
  if (out_width == img.width() && out_height == img.height()) return img;

  const auto xs = bilinear_taps(img.width(), out_width);
  const auto ys = bilinear_taps(img.height(), out_height);
  const auto src = img.pixels();
  const std::size_t stride = static_cast<std::size_t>(img.width()) * 3;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(out_width) * out_height * 3);

  for (int y = 0; y < out_height; ++y) {
    const Tap& ty = ys[y];
    const std::uint8_t* r0 = src.data() + ty.lo * stride;
    const std::uint8_t* r1 = src.data() + ty.hi * stride;
    std::uint8_t* dst = out.data() + static_cast<std::size_t>(y) * out_width * 3;
    for (int x = 0; x < out_width; ++x) {
      const Tap& tx = xs[x];
      for (int c = 0; c < 3; ++c) {
        const double top = r0[tx.lo * 3 + c] * (1.0 - tx.t) + r0[tx.hi * 3 + c] * tx.t;
        const double bot = r1[tx.lo * 3 + c] * (1.0 - tx.t) + r1[tx.hi * 3 + c] * tx.t;
        const double v = top * (1.0 - ty.t) + bot * ty.t;
        dst[x * 3 + c] = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
      }
    }
  }
  return RasterImage(out_width, out_height, std::move(out));
}

Plane resize_bilinear(const Plane& plane, int out_width, int out_height) {
  check_target(out_width, out_height);
  if (out_width == plane.width() && out_height == plane.height()) return plane;

  const auto xs = bilinear_taps(plane.width(), out_width);
  const auto ys = bilinear_taps(plane.height(), out_height);
  Plane out(out_width, out_height);
  for (int y = 0; y < out_height; ++y) {
    const Tap& ty = ys[y];
    for (int x = 0; x < out_width; ++x) {
      const Tap& tx = xs[x];
      const double top = plane(tx.lo, ty.lo) * (1.0 - tx.t) + plane(tx.hi, ty.lo) * tx.t;
      const double bot = plane(tx.lo, ty.hi) * (1.0 - tx.t) + plane(tx.hi, ty.hi) * tx.t;
      out(x, y) = static_cast<float>(top * (1.0 - ty.t) + bot * ty.t);
    }
  }
  return out;
}

RasterImage rescale(const RasterImage& img, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw Error(ErrorCode::kInvalidScale, "scale factor must be positive");
  }
  const auto w = static_cast<long long>(std::llround(img.width() * factor));
  const auto h = static_cast<long long>(std::llround(img.height() * factor));
  if (w < 1 || h < 1 || w > (1LL << 20) || h > (1LL << 20)) {
    throw Error(ErrorCode::kInvalidScale, "scale factor produces an invalid size");
  }
  return resize_bilinear(img, static_cast<int>(w), static_cast<int>(h));
}

RasterImage make_thumbnail(const RasterImage& img, int max_dim) {
  if (max_dim < 1) {
    throw Error(ErrorCode::kInvalidParameter, "thumbnail max_dim must be >= 1");
  }
  const int longest = std::max(img.width(), img.height());
  if (longest <= max_dim) return img;

  const double s = static_cast<double>(max_dim) / longest;
  const int w = img.width() >= img.height()
                    ? max_dim
                    : std::max(1, static_cast<int>(std::lround(img.width() * s)));
  const int h = img.height() > img.width()
                    ? max_dim
                    : std::max(1, static_cast<int>(std::lround(img.height() * s)));

  // Box filter: each output pixel averages the source block it covers.
  std::vector<std::uint8_t> out(static_cast<std::size_t>(w) * h * 3);
  std::vector<int> x_edges(w + 1), y_edges(h + 1);
  for (int i = 0; i <= w; ++i) {
    x_edges[i] = static_cast<int>(static_cast<long long>(i) * img.width() / w);
  }
  for (int i = 0; i <= h; ++i) {
    y_edges[i] = static_cast<int>(static_cast<long long>(i) * img.height() / h);
  }
  for (int y = 0; y < h; ++y) {
    const int y0 = y_edges[y];
    const int y1 = std::max(y_edges[y + 1], y0 + 1);
    for (int x = 0; x < w; ++x) {
      const int x0 = x_edges[x];
      const int x1 = std::max(x_edges[x + 1], x0 + 1);
      std::array<std::uint64_t, 3> sum{};
      for (int sy = y0; sy < y1; ++sy) {
        for (int sx = x0; sx < x1; ++sx) {
          const auto p = img.at(sx, sy);
          sum[0] += p[0];
          sum[1] += p[1];
          sum[2] += p[2];
        }
      }
      const std::uint64_t n = static_cast<std::uint64_t>(y1 - y0) * (x1 - x0);
      for (int c = 0; c < 3; ++c) {
        out[(static_cast<std::size_t>(y) * w + x) * 3 + c] =
            static_cast<std::uint8_t>((sum[c] + n / 2) / n);
      }
    }
  }
  return RasterImage(w, h, std::move(out));
}

}  // namespace pq
