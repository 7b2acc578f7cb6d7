#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <future>
#include <mutex>
#include <optional>
#include <thread>
#include <type_traits>
#include <vector>

namespace pq {

struct PoolMetrics {
  std::int64_t queue_depth = 0;
  std::int64_t jobs_running = 0;
  std::int64_t jobs_completed = 0;
};

/// Fixed set of workers behind a bounded FIFO. A job is admitted only while
/// fewer than workers + queue_capacity jobs are waiting or running; beyond
/// that submit() throws Overloaded instead of queuing.
class JobPool {
 public:
  JobPool(int workers, int queue_capacity);
  ~JobPool();

  JobPool(const JobPool&) = delete;
  JobPool& operator=(const JobPool&) = delete;

  std::future<void> submit(std::function<void()> job);

  /// Submits `fn` and blocks until it has run; exceptions propagate.
  template <class F>
  auto run(F&& fn) -> std::invoke_result_t<F&> {
    using R = std::invoke_result_t<F&>;
    if constexpr (std::is_void_v<R>) {
      submit([&fn] { fn(); }).get();
    } else {
      std::optional<R> result;
      submit([&fn, &result] { result.emplace(fn()); }).get();
      return std::move(*result);
    }
  }

  PoolMetrics metrics() const noexcept;

  int workers() const noexcept { return static_cast<int>(threads_.size()); }
  int queue_capacity() const noexcept { return capacity_; }

  /// Stops admission and waits for admitted jobs to finish. Returns false
  /// if `grace` elapsed first; workers are joined either way once idle.
  bool shutdown(std::chrono::milliseconds grace = std::chrono::seconds(30));

 private:
  void worker_loop();

  int capacity_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable idle_cv_;
  std::deque<std::packaged_task<void()>> queue_;
  bool stopping_ = false;
  int in_system_ = 0;
  std::atomic<std::int64_t> queue_depth_{0};
  std::atomic<std::int64_t> running_{0};
  std::atomic<std::int64_t> completed_{0};
  std::vector<std::jthread> threads_;
};

}  // namespace pq
