#include "pathoquant/service/runtime.hpp"

#include <future>
#include <thread>

#include "pathoquant/error.hpp"

namespace pq {

std::unique_ptr<Runtime> start_runtime(const ServiceConfig& config,
                                       std::shared_ptr<const InferenceBackend> backend) {
  config.validate();
  auto rt = std::make_unique<Runtime>();
  rt->config = config;
  if (!backend) backend = std::make_shared<ReferenceBackend>(config.stains());
  rt->pool = std::make_shared<JobPool>(config.effective_pool_size(), config.effective_queue_capacity());
  rt->pipeline = std::make_shared<Pipeline>(std::move(backend), PipelineConfig{config.limits, config.infer});
  rt->store = open_store(config.storage);

  rt->api = std::make_unique<ApiService>(rt->pipeline, rt->pool, rt->store);
  rt->api->bind(config.host, config.api_port);

  std::shared_ptr<Processor> processor;
  if (config.pipeline_mode == PipelineMode::kHttp) {
    const std::string url = config.api_url.empty()
                                ? "http://" + config.host + ":" + std::to_string(rt->api->port())
                                : config.api_url;
    processor = std::make_shared<HttpProcessor>(ApiClient(url));
  } else {
    processor = std::make_shared<InProcessProcessor>(rt->pipeline, rt->pool);
  }
  WebAppOptions web;
  web.limits = config.limits;
  web.ttl_seconds = config.ttl_seconds;
  web.sample_dir = config.sample_dir;
  web.web_root = config.web_root;
  rt->web = std::make_unique<WebAppService>(rt->store, processor, web);
  rt->web->bind(config.host, config.web_port);

  rt->api->start();
  rt->web->start();
  return rt;
}

bool stop_runtime(Runtime& rt, std::chrono::milliseconds grace) {
  const auto deadline = std::chrono::steady_clock::now() + grace;
  // Detached so that a stuck request cannot hold the caller past `grace`.
  auto done = std::make_shared<std::promise<void>>();
  auto stopped = done->get_future();
  std::thread([&rt, done] {
    rt.web->stop();
    rt.api->stop();
    done->set_value();
  }).detach();
  if (stopped.wait_until(deadline) != std::future_status::ready) return false;
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
      deadline - std::chrono::steady_clock::now());
  return rt.pool->shutdown(std::max(left, std::chrono::milliseconds(0)));
}

}  // namespace pq
