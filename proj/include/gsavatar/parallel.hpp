#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace gsa {

// Minimal persistent worker pool. Work is always split into one contiguous
// chunk per worker, and every output element is written by exactly one chunk,
// so results are bit-identical for any worker count as long as chunks do not
// accumulate into shared memory.
class ThreadPool {
 public:
  explicit ThreadPool(int workers);
  ~ThreadPool();

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  int workers() const { return static_cast<int>(threads_.size()) + 1; }

  // Blocks until fn(begin, end) has run on disjoint chunks covering [0, n).
  void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

  // Process-wide pool; size from GSA_THREADS env var, defaulting to
  // hardware_concurrency.
  static ThreadPool& global();

  // Replaces the global pool. Must not race with parallel_for; intended for
  // tests that verify thread-count independence.
  static void set_global_workers(int workers);

 private:
  void worker_loop(int index);

  struct Job {
    const std::function<void(int64_t, int64_t)>* fn = nullptr;
    int64_t n = 0;
    int chunks = 0;
  };

  std::vector<std::thread> threads_;
  std::mutex mutex_;
  std::condition_variable cv_start_;
  std::condition_variable cv_done_;
  Job job_;
  uint64_t epoch_ = 0;
  int pending_ = 0;
  bool stop_ = false;
};

// parallel_for on the global pool.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

}  // namespace gsa
