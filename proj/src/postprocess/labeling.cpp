#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "pathoquant/error.hpp"
#include "pathoquant/postprocess.hpp"

namespace pq {

namespace {

class DisjointSet {
 public:
  std::int32_t make() {
    parent_.push_back(static_cast<std::int32_t>(parent_.size()));
    return parent_.back();
  }
  std::int32_t find(std::int32_t a) {
    while (parent_[a] != a) {
      parent_[a] = parent_[parent_[a]];
      a = parent_[a];
    }
    return a;
  }
  void unite(std::int32_t a, std::int32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::int32_t> parent_;
};

}  // namespace

std::size_t BinaryMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(values.begin(), values.end(), std::uint8_t{1}));
}

BinaryMask threshold_mask(const Plane& fg_prob, double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw Error(ErrorCode::kInvalidParameter, "segmentation threshold must be in [0,1]");
  }
  BinaryMask mask{fg_prob.width(), fg_prob.height(), {}};
  mask.values.resize(fg_prob.size());
  const auto v = fg_prob.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    mask.values[i] = static_cast<double>(v[i]) >= t ? 1 : 0;
  }
  return mask;
}

LabelMap label_components(const BinaryMask& mask) {
  const int w = mask.width;
  const int h = mask.height;
  LabelMap lm{w, h, 0, std::vector<std::int32_t>(mask.values.size(), -1)};
  DisjointSet sets;

  auto provisional = [&](int x, int y) -> std::int32_t {
    if (x < 0 || y < 0 || x >= w) return -1;
    return lm.labels[static_cast<std::size_t>(y) * w + x];
  };

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.at(x, y)) continue;
      const std::int32_t neighbours[] = {provisional(x - 1, y), provisional(x - 1, y - 1),
                                         provisional(x, y - 1), provisional(x + 1, y - 1)};
      std::int32_t label = -1;
      for (std::int32_t n : neighbours) {
        if (n < 0) continue;
        if (label < 0) {
          label = n;
        } else {
          sets.unite(label, n);
        }
      }
      if (label < 0) label = sets.make();
      lm.labels[static_cast<std::size_t>(y) * w + x] = label;
    }
  }

  // Second pass: resolve roots and number them by first appearance.
  std::vector<std::int32_t> final_id;
  for (auto& label : lm.labels) {
    if (label < 0) {
      label = 0;
      continue;
    }
    const std::int32_t root = sets.find(label);
    if (static_cast<std::size_t>(root) >= final_id.size()) final_id.resize(root + 1, 0);
    if (final_id[root] == 0) final_id[root] = ++lm.count;
    label = final_id[root];
  }
  return lm;
}

LabelMap size_gate(const LabelMap& lm, double min_area, std::optional<double> max_area) {
  if (!(min_area >= 0.0)) {
    throw Error(ErrorCode::kInvalidGate, "size gate minimum must be >= 0");
  }
  if (max_area && !(*max_area >= min_area)) {
    throw Error(ErrorCode::kInvalidGate, "size gate maximum is below the minimum");
  }
  std::vector<std::int64_t> area(static_cast<std::size_t>(lm.count) + 1, 0);
  for (std::int32_t l : lm.labels) ++area[l];

  std::vector<std::int32_t> remap(area.size(), 0);
  LabelMap out{lm.width, lm.height, 0, {}};
  for (std::int32_t l = 1; l <= lm.count; ++l) {
    const auto a = static_cast<double>(area[l]);
    const bool keep = a >= min_area && (!max_area || a <= *max_area);
    if (keep) remap[l] = ++out.count;
  }
  out.labels.resize(lm.labels.size());
  std::transform(lm.labels.begin(), lm.labels.end(), out.labels.begin(),
                 [&](std::int32_t l) { return remap[l]; });
  return out;
}

}  // namespace pq
