#pragma once

#include <httplib.h>

#include <memory>
#include <string>
#include <thread>

#include "pathoquant/object_store.hpp"
#include "pathoquant/service/job_pool.hpp"
#include "pathoquant/service/pipeline.hpp"

namespace pq {

/// Owns an httplib server and the thread that runs it.
class HttpService {
 public:
  virtual ~HttpService();

  /// Port 0 picks a free port. Returns the bound port; throws Internal when
  /// the address is unavailable.
  int bind(const std::string& host, int port);
  /// Serves on a background thread; bind() must have succeeded.
  void start();
  /// Closes the listener, lets in-flight requests finish, joins.
  void stop();

  int port() const noexcept { return port_; }
  httplib::Server& server() noexcept { return server_; }

 protected:
  /// Sized so that every request the job pool can admit, plus the ones it
  /// will reject, is read concurrently.
  void configure(std::size_t worker_threads, std::size_t max_payload_bytes);

  httplib::Server server_;

 private:
  std::thread thread_;
  int port_ = -1;
};

/// Stateless inference endpoints: /api/infer, /api/adjust, /api/health,
/// /api/metrics. Nothing about a request is written anywhere; `results`
/// is only read, to resolve result_id in /api/adjust.
class ApiService final : public HttpService {
 public:
  ApiService(std::shared_ptr<const Pipeline> pipeline, std::shared_ptr<JobPool> pool,
             std::shared_ptr<const ObjectStore> results = nullptr);
  ~ApiService() override;

 private:
  void routes();

  std::shared_ptr<const Pipeline> pipeline_;
  std::shared_ptr<JobPool> pool_;
  std::shared_ptr<const ObjectStore> results_;
};

}  // namespace pq
