#pragma once

#include <array>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_set>

#include <json.hpp>

#include "pathoquant/object_store.hpp"
#include "pathoquant/service/api_client.hpp"
#include "pathoquant/service/api_service.hpp"
#include "pathoquant/service/job_pool.hpp"
#include "pathoquant/service/pipeline.hpp"

namespace pq {

/// Where the website sends its computation.
class Processor {
 public:
  virtual ~Processor() = default;
  virtual PipelineResult process(const RasterImage& original, const PngBytes& original_png,
                                 Resolution resolution, const PostprocessParams& params) = 0;
  virtual PipelineResult adjust(const PngBytes& seg_raw_png, const PngBytes& original_png,
                                double canonical_scale, const PostprocessParams& params) = 0;
};

/// Runs the pipeline in this process on the shared job pool.
class InProcessProcessor final : public Processor {
 public:
  InProcessProcessor(std::shared_ptr<const Pipeline> pipeline, std::shared_ptr<JobPool> pool);
  PipelineResult process(const RasterImage& original, const PngBytes& original_png,
                         Resolution resolution, const PostprocessParams& params) override;
  PipelineResult adjust(const PngBytes& seg_raw_png, const PngBytes& original_png,
                        double canonical_scale, const PostprocessParams& params) override;

 private:
  std::shared_ptr<const Pipeline> pipeline_;
  std::shared_ptr<JobPool> pool_;
};

/// Calls an API service over HTTP.
class HttpProcessor final : public Processor {
 public:
  explicit HttpProcessor(ApiClient client);
  PipelineResult process(const RasterImage& original, const PngBytes& original_png,
                         Resolution resolution, const PostprocessParams& params) override;
  PipelineResult adjust(const PngBytes& seg_raw_png, const PngBytes& original_png,
                        double canonical_scale, const PostprocessParams& params) override;

 private:
  ApiClient client_;
};

struct WebAppOptions {
  ImageLimits limits;
  std::int64_t ttl_seconds = 7 * 24 * 3600;
  std::filesystem::path sample_dir;
  std::filesystem::path web_root;
  /// Unix seconds; replaceable for retention tests.
  std::function<std::int64_t()> clock;
  bool sweep_on_start = true;
  std::chrono::seconds sweep_interval = std::chrono::hours(1);
};

inline constexpr std::size_t kMaxFeedbackChars = 10000;
inline constexpr const char* kSessionCookie = "pq_session";

/// Session-oriented website backend. Uploads, results and feedback are
/// kept in the object store; sessions (terms acceptance) live in memory
/// for the cookie's lifetime.
class WebAppService final : public HttpService {
 public:
  WebAppService(std::shared_ptr<ObjectStore> store, std::shared_ptr<Processor> processor,
                WebAppOptions options);
  ~WebAppService() override;

  /// Deletes uploads and results older than the TTL. Returns how many
  /// records were removed.
  int sweep_expired();

  /// Page data for /results/{id}.
  nlohmann::json result_page(const std::string& result_id) const;

 private:
  void routes();
  std::mutex& record_mutex(const std::string& id) const;
  bool terms_accepted(const httplib::Request& req) const;
  bool gate(const httplib::Request& req, httplib::Response& res) const;
  nlohmann::json store_upload(const std::string& source_bytes);
  std::int64_t now() const;

  std::shared_ptr<ObjectStore> store_;
  std::shared_ptr<Processor> processor_;
  WebAppOptions options_;

  mutable std::array<std::mutex, 64> record_mutexes_;
  mutable std::mutex session_mu_;
  std::unordered_set<std::string> sessions_;

  std::mutex sweep_mu_;
  std::condition_variable_any sweep_cv_;
  std::jthread sweeper_;
};

}  // namespace pq
