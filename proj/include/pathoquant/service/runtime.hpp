#pragma once

#include <chrono>
#include <memory>

#include "pathoquant/service/api_service.hpp"
#include "pathoquant/service/config.hpp"
#include "pathoquant/service/webapp_service.hpp"

namespace pq {

/// Both services plus everything they share, started from one config.
struct Runtime {
  ServiceConfig config;
  std::shared_ptr<JobPool> pool;
  std::shared_ptr<const Pipeline> pipeline;
  std::shared_ptr<ObjectStore> store;
  std::unique_ptr<ApiService> api;
  std::unique_ptr<WebAppService> web;

  int api_port() const { return api->port(); }
  int web_port() const { return web->port(); }
};

/// Binds and starts both services. `backend` defaults to the reference
/// backend built from the configured stain vectors. Throws Internal when a
/// port cannot be bound.
std::unique_ptr<Runtime> start_runtime(const ServiceConfig& config,
                                       std::shared_ptr<const InferenceBackend> backend = nullptr);

/// Stops accepting connections, lets in-flight requests and admitted jobs
/// finish, and joins. Returns false when `grace` ran out first.
bool stop_runtime(Runtime& rt, std::chrono::milliseconds grace = std::chrono::seconds(30));

}  // namespace pq
