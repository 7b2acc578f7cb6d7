#include "pathoquant/service/api_service.hpp"

#include <json.hpp>

#include "pathoquant/error.hpp"
#include "pathoquant/service/base64.hpp"
#include "pathoquant/service/http_util.hpp"
#include "pathoquant/service/records.hpp"

namespace pq {

using nlohmann::json;

HttpService::~HttpService() { stop(); }

void HttpService::configure(std::size_t worker_threads, std::size_t max_payload_bytes) {
  server_.new_task_queue = [worker_threads] { return new httplib::ThreadPool(worker_threads); };
  server_.set_payload_max_length(max_payload_bytes);
  server_.set_read_timeout(60);
  server_.set_write_timeout(60);
  // httplib's default adds SO_REUSEPORT, which lets a second server share
  // an occupied port silently.
  server_.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
  server_.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
    switch (res.status) {
      case 404: http::send_error(res, 404, "not_found", "no such route"); break;
      case 413: http::send_error(res, 413, "image_too_large", "request body too large"); break;
      case 405: http::send_error(res, 405, "bad_parameter", "method not allowed"); break;
      default:
        http::send_error(res, res.status, res.status >= 500 ? "internal" : "bad_parameter",
                         "request failed");
    }
    return httplib::Server::HandlerResponse::Handled;
  });
  server_.set_exception_handler(
      [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
          std::rethrow_exception(ep);
        } catch (const Error& e) {
          http::send_error(res, e);
        } catch (const std::exception& e) {
          http::send_error(res, 500, "internal", e.what());
        } catch (...) {
          http::send_error(res, 500, "internal", "unknown failure");
        }
      });
}

int HttpService::bind(const std::string& host, int port) {
  if (port == 0) {
    port_ = server_.bind_to_any_port(host);
    if (port_ < 0) throw Error(ErrorCode::kInternal, "cannot bind " + host + " to any port");
  } else {
    if (!server_.bind_to_port(host, port)) {
      throw Error(ErrorCode::kInternal, "cannot bind " + host + ":" + std::to_string(port) +
                                            " (address in use or not permitted)");
    }
    port_ = port;
  }
  return port_;
}

void HttpService::start() {
  if (port_ < 0) throw Error(ErrorCode::kInternal, "start() before bind()");
  thread_ = std::thread([this] { server_.listen_after_bind(); });
  server_.wait_until_ready();
}

void HttpService::stop() {
  if (thread_.joinable()) {
    server_.stop();
    thread_.join();
  }
}

ApiService::ApiService(std::shared_ptr<const Pipeline> pipeline, std::shared_ptr<JobPool> pool,
                       std::shared_ptr<const ObjectStore> results)
    : pipeline_(std::move(pipeline)), pool_(std::move(pool)), results_(std::move(results)) {
  const auto admitted = static_cast<std::size_t>(pool_->workers() + pool_->queue_capacity());
  configure(admitted + 8, 512u << 20);
  routes();
}

ApiService::~ApiService() { stop(); }

namespace {

json images_json(const PipelineResult& r) {
  json images = json::object();
  for (const char* name : kResultImageNames) {
    auto it = r.images.find(name);
    if (it != r.images.end()) images[name] = base64_encode(it->second);
  }
  return images;
}

std::span<const std::uint8_t> bytes_of(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

}  // namespace

void ApiService::routes() {
  server_.Post("/api/infer", [this](const httplib::Request& req, httplib::Response& res) {
    http::guarded(res, [&] {
      if (!req.is_multipart_form_data() || !req.has_file("img")) {
        throw Error(ErrorCode::kInvalidParameter, "multipart file part 'img' is required");
      }
      const std::string res_text = http::field(req, "resolution").value_or("20x");
      const auto resolution = parse_resolution(res_text);
      if (!resolution) {
        throw Error(ErrorCode::kInvalidParameter,
                    "resolution must be 10x, 20x or 40x, got '" + res_text + "'");
      }
      const bool pil = http::parse_bool("pil", http::field(req, "pil").value_or("false"));
      const bool slim = http::parse_bool("slim", http::field(req, "slim").value_or("false"));
      const PostprocessParams params = http::parse_postprocess_params(req);
      const auto file = req.get_file_value("img");

      const PipelineResult result = pool_->run([&] {
        const RasterImage img = pipeline_->decode(bytes_of(file.content), pil);
        return pipeline_->process(img, *resolution, params, slim);
      });
      http::send_json(res, json{{"images", images_json(result)},
                                {"scoring", http::scoring_to_json(result.scoring)}});
    });
  });

  server_.Post("/api/adjust", [this](const httplib::Request& req, httplib::Response& res) {
    http::guarded(res, [&] {
      const PostprocessParams params = http::parse_postprocess_params(req);
      ImageLimits seg_limits = pipeline_->config().limits;
      // 10x input is upsampled 2x, so seg_raw may be twice the input cap.
      seg_limits.max_dim *= 2;

      PipelineResult result;
      if (auto id = http::field(req, "result_id")) {
        if (!results_) throw Error(ErrorCode::kNotFound, "result lookup is not configured");
        const ResultRecord rec = load_result(*results_, *id);
        const auto seg_png = results_->get(result_image_key(rec.result_id, "seg_raw")).bytes;
        const auto orig_png = results_->get(result_image_key(rec.result_id, "original")).bytes;
        const RasterImage seg_raw = decode_image(seg_png, true, seg_limits);
        const RasterImage original = decode_image(orig_png, true, pipeline_->config().limits);
        result = pipeline_->adjust(seg_raw, &original, rec.canonical_scale, params);
      } else {
        if (!req.has_file("seg_raw")) {
          throw Error(ErrorCode::kInvalidParameter,
                      "either result_id or a multipart 'seg_raw' part is required");
        }
        const auto seg_file = req.get_file_value("seg_raw");
        const RasterImage seg_raw = decode_image(bytes_of(seg_file.content), true, seg_limits);
        std::optional<RasterImage> original;
        if (req.has_file("img")) {
          original = pipeline_->decode(bytes_of(req.get_file_value("img").content), false);
        }
        std::optional<double> scale;
        if (auto r = http::field(req, "resolution")) {
          const auto parsed = parse_resolution(*r);
          if (!parsed) throw Error(ErrorCode::kInvalidParameter, "resolution must be 10x, 20x or 40x");
          scale = canonical_scale(*parsed);
        }
        result = pipeline_->adjust(seg_raw, original ? &*original : nullptr, scale, params);
      }
      http::send_json(res, json{{"images", images_json(result)},
                                {"scoring", http::scoring_to_json(result.scoring)}});
    });
  });

  server_.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
    http::send_json(res, json{{"status", "ok"}});
  });

  server_.Get("/api/metrics", [this](const httplib::Request&, httplib::Response& res) {
    const PoolMetrics m = pool_->metrics();
    http::send_json(res, json{{"queue_depth", m.queue_depth},
                              {"jobs_running", m.jobs_running},
                              {"jobs_completed", m.jobs_completed}});
  });
}

}  // namespace pq
