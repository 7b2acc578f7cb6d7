#include "pathoquant/service/pipeline.hpp"

#include <json.hpp>

#include "pathoquant/error.hpp"

namespace pq {

namespace {

PngBytes modality_png(const Plane& plane, int width, int height) {
  const Plane sized = (plane.width() == width && plane.height() == height)
                          ? plane
                          : resize_bilinear(plane, width, height);
  const auto gray = quantize_plane(sized);
  return encode_png_gray(width, height, gray);
}

}  // namespace

std::string scoring_json(const QuantResult& q, int indent) {
  return nlohmann::json{{"num_total", q.num_total},
                        {"num_pos", q.num_pos},
                        {"percent_pos", q.percent_pos}}
      .dump(indent);
}

Pipeline::Pipeline(std::shared_ptr<const InferenceBackend> backend, PipelineConfig config)
    : backend_(std::move(backend)), config_(config) {
  if (!backend_) throw Error(ErrorCode::kInvalidParameter, "pipeline needs a backend");
  config_.limits.validate();
}

RasterImage Pipeline::decode(std::span<const std::uint8_t> bytes, bool pil) const {
  const ImageFormat fmt = sniff_format(bytes);
  const bool fast = pil || fmt == ImageFormat::kPng || fmt == ImageFormat::kJpeg;
  return decode_image(bytes, fast, config_.limits);
}

PipelineResult Pipeline::process(const RasterImage& img, Resolution resolution,
                                 const PostprocessParams& params, bool slim) const {
  params.validate();
  if (img.width() > config_.limits.max_dim || img.height() > config_.limits.max_dim) {
    throw Error(ErrorCode::kImageTooLarge, "image exceeds " + std::to_string(config_.limits.max_dim) +
                                               " pixels per side");
  }
  const InferenceOutput out = infer(img, resolution, *backend_, config_.infer);
  // Score on the 8-bit grid that seg_raw carries so later adjustments of
  // the same seg_raw reproduce this result exactly.
  const SegScores quantized = quantize_seg_scores(out.seg);
  const PostprocessResult post = postprocess(quantized, params);

  PipelineResult result;
  result.scoring = post.quant;
  result.width = img.width();
  result.height = img.height();
  result.canonical_scale = out.canonical_scale;
  result.images["seg"] = encode_png(render_seg_image(post.labels, post.cells));
  if (slim) return result;

  result.images["hema"] = modality_png(out.modalities.hema, img.width(), img.height());
  result.images["dapi"] = modality_png(out.modalities.dapi, img.width(), img.height());
  result.images["lap2"] = modality_png(out.modalities.lap2, img.width(), img.height());
  result.images["marker"] = modality_png(out.modalities.marker, img.width(), img.height());
  result.images["overlay"] =
      encode_png(render_overlay(img, post.labels, post.cells, out.canonical_scale));
  result.images["seg_raw"] = encode_png(pack_seg_raw(quantized));
  return result;
}

PipelineResult Pipeline::adjust(const RasterImage& seg_raw, const RasterImage* original,
                                std::optional<double> scale,
                                const PostprocessParams& params) const {
  params.validate();
  const SegScores seg = unpack_seg_raw(seg_raw);
  const PostprocessResult post = postprocess(seg, params);

  PipelineResult result;
  result.scoring = post.quant;
  result.width = seg_raw.width();
  result.height = seg_raw.height();
  result.images["seg"] = encode_png(render_seg_image(post.labels, post.cells));
  if (original != nullptr) {
    if (!scale) {
      scale = infer_canonical_scale(original->width(), original->height(), seg_raw.width(),
                                    seg_raw.height());
    }
    if (!scale) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "original image size is not a supported multiple of the seg_raw size");
    }
    result.width = original->width();
    result.height = original->height();
    result.canonical_scale = *scale;
    result.images["overlay"] = encode_png(render_overlay(*original, post.labels, post.cells, *scale));
  }
  return result;
}

}  // namespace pq
