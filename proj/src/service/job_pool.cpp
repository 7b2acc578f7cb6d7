#include "pathoquant/service/job_pool.hpp"

#include "pathoquant/error.hpp"

namespace pq {

JobPool::JobPool(int workers, int queue_capacity) : capacity_(queue_capacity) {
  if (workers < 1 || queue_capacity < 0) {
    throw Error(ErrorCode::kInvalidParameter, "pool needs >= 1 worker and a non-negative queue");
  }
  threads_.reserve(static_cast<std::size_t>(workers));
  for (int i = 0; i < workers; ++i) threads_.emplace_back([this] { worker_loop(); });
}

JobPool::~JobPool() { shutdown(std::chrono::hours(24)); }

std::future<void> JobPool::submit(std::function<void()> job) {
  // Bookkeeping runs inside the task, before the future becomes ready, so a
  // caller that has seen its result also sees the updated counters.
  std::packaged_task<void()> task([this, job = std::move(job)] {
    struct Done {
      JobPool* pool;
      ~Done() {
        {
          std::lock_guard lock(pool->mu_);
          pool->running_.fetch_sub(1);
          pool->completed_.fetch_add(1);
          --pool->in_system_;
        }
        pool->idle_cv_.notify_all();
      }
    } done{this};
    job();
  });
  auto fut = task.get_future();
  {
    std::lock_guard lock(mu_);
    if (stopping_) throw Error(ErrorCode::kOverloaded, "server is shutting down");
    if (in_system_ >= workers() + capacity_) {
      throw Error(ErrorCode::kOverloaded, "inference queue is full");
    }
    ++in_system_;
    queue_.push_back(std::move(task));
    queue_depth_.fetch_add(1);
  }
  cv_.notify_one();
  return fut;
}

void JobPool::worker_loop() {
  while (true) {
    std::packaged_task<void()> task;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;  // stopping and drained
      task = std::move(queue_.front());
      queue_.pop_front();
      queue_depth_.fetch_sub(1);
      running_.fetch_add(1);
    }
    task();  // exceptions land in the future
  }
}

PoolMetrics JobPool::metrics() const noexcept {
  return {queue_depth_.load(), running_.load(), completed_.load()};
}

bool JobPool::shutdown(std::chrono::milliseconds grace) {
  bool drained;
  {
    std::unique_lock lock(mu_);
    stopping_ = true;
    cv_.notify_all();
    drained = idle_cv_.wait_for(lock, grace, [this] { return in_system_ == 0; });
  }
  if (drained) {
    for (auto& t : threads_) {
      if (t.joinable()) t.join();
    }
  }
  return drained;
}

}  // namespace pq
