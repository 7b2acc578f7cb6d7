#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pathoquant/postprocess.hpp"
#include "pathoquant/service/pipeline.hpp"

namespace pq {

/// Client for a running API service. Non-2xx answers are rethrown as
/// pq::Error with the code carried in the error body.
class ApiClient {
 public:
  explicit ApiClient(std::string base_url, int timeout_seconds = 300);

  /// Images in the result are the decoded Base64 PNG payloads.
  PipelineResult infer(std::span<const std::uint8_t> image, const std::string& filename,
                       const std::string& resolution, const PostprocessParams& params,
                       bool slim = false, bool pil = false) const;

  PipelineResult adjust(std::span<const std::uint8_t> seg_raw_png,
                        const std::vector<std::uint8_t>* original_png,
                        const PostprocessParams& params) const;

  bool healthy() const;

  const std::string& base_url() const noexcept { return base_url_; }

 private:
  std::string base_url_;
  int timeout_seconds_;
};

}  // namespace pq
