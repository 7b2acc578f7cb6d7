#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pathoquant/imaging.hpp"
#include "pathoquant/inference.hpp"
#include "pathoquant/postprocess.hpp"

namespace pq {

using PngBytes = std::vector<std::uint8_t>;

/// Image names of a full result, in wire order.
inline constexpr const char* kResultImageNames[] = {"hema", "dapi",    "lap2",   "marker",
                                                    "seg",  "overlay", "seg_raw"};

struct PipelineConfig {
  ImageLimits limits;
  InferOptions infer;
};

struct PipelineResult {
  std::map<std::string, PngBytes> images;
  QuantResult scoring;
  int width = 0;  // original image
  int height = 0;
  double canonical_scale = 1.0;
};

std::string scoring_json(const QuantResult& q, int indent = -1);

/// decode -> infer -> quantize -> postprocess -> render, shared by the API,
/// the website, the CLI and the bindings.
class Pipeline {
 public:
  Pipeline(std::shared_ptr<const InferenceBackend> backend, PipelineConfig config = {});

  /// Fast decoder when `pil` is set or the bytes carry PNG/JPEG magic.
  RasterImage decode(std::span<const std::uint8_t> bytes, bool pil) const;

  /// With `slim`, only "seg" is rendered.
  PipelineResult process(const RasterImage& img, Resolution resolution,
                         const PostprocessParams& params, bool slim = false) const;

  /// Re-runs postprocessing from a packed seg_raw. The overlay is rendered
  /// only when `original` is given; its scale comes from `scale` or, when
  /// absent, from the size ratio. Throws DimensionMismatch when no
  /// supported scale fits.
  PipelineResult adjust(const RasterImage& seg_raw, const RasterImage* original,
                        std::optional<double> scale, const PostprocessParams& params) const;

  const PipelineConfig& config() const noexcept { return config_; }
  const InferenceBackend& backend() const noexcept { return *backend_; }

 private:
  std::shared_ptr<const InferenceBackend> backend_;
  PipelineConfig config_;
};

}  // namespace pq
