#include "gsavatar/parallel.hpp"

#include <cstdlib>
#include <memory>
#include <string>

namespace gsa {

ThreadPool::ThreadPool(int workers) {
  if (workers < 1) workers = 1;
  threads_.reserve(static_cast<size_t>(workers - 1));
  for (int i = 0; i < workers - 1; ++i) {
    threads_.emplace_back([this, i] { worker_loop(i + 1); });
  }
}

ThreadPool::~ThreadPool() {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    stop_ = true;
  }
  cv_start_.notify_all();
  for (auto& t : threads_) t.join();
}

void ThreadPool::parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
  if (n <= 0) return;
  const int chunks = workers();
  if (chunks == 1 || n == 1) {
    fn(0, n);
    return;
  }
  {
    std::lock_guard<std::mutex> lock(mutex_);
    job_.fn = &fn;
    job_.n = n;
    job_.chunks = chunks;
    pending_ = static_cast<int>(threads_.size());
    ++epoch_;
  }
  cv_start_.notify_all();

  // Chunk 0 runs on the calling thread.
  const int64_t step = (n + chunks - 1) / chunks;
  fn(0, std::min<int64_t>(step, n));

  std::unique_lock<std::mutex> lock(mutex_);
  cv_done_.wait(lock, [this] { return pending_ == 0; });
}

void ThreadPool::worker_loop(int index) {
  uint64_t seen = 0;
  for (;;) {
    const std::function<void(int64_t, int64_t)>* fn = nullptr;
    int64_t n = 0;
    int chunks = 0;
    {
      std::unique_lock<std::mutex> lock(mutex_);
      cv_start_.wait(lock, [&] { return stop_ || epoch_ != seen; });
      if (stop_) return;
      seen = epoch_;
      fn = job_.fn;
      n = job_.n;
      chunks = job_.chunks;
    }
    const int64_t step = (n + chunks - 1) / chunks;
    const int64_t begin = step * index;
    const int64_t end = std::min<int64_t>(begin + step, n);
    if (begin < end) (*fn)(begin, end);
    {
      std::lock_guard<std::mutex> lock(mutex_);
      --pending_;
    }
    cv_done_.notify_one();
  }
}

namespace {
std::unique_ptr<ThreadPool>& global_slot() {
  static std::unique_ptr<ThreadPool> pool;
  return pool;
}
}  // namespace

ThreadPool& ThreadPool::global() {
  auto& slot = global_slot();
  if (!slot) {
    int n = 0;
    if (const char* env = std::getenv("GSA_THREADS")) n = std::atoi(env);
    if (n < 1) {
      const unsigned hc = std::thread::hardware_concurrency();
      n = hc == 0 ? 1 : static_cast<int>(hc);
    }
    slot = std::make_unique<ThreadPool>(n);
  }
  return *slot;
}

void ThreadPool::set_global_workers(int workers) {
  global_slot() = std::make_unique<ThreadPool>(workers);
}

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
  ThreadPool::global().parallel_for(n, fn);
}

}  // namespace gsa
