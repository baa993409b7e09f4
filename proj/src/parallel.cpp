#include "biphasic/parallel.hpp"

#include <algorithm>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

namespace bp {
namespace {

thread_local bool tl_in_worker = false;

class Pool {
 public:
  explicit Pool(int workers) : target_(workers) {
    for (int i = 1; i < workers; ++i) {
      threads_.emplace_back([this, i] { worker_loop(i); });
    }
  }

  ~Pool() {
    {
      std::unique_lock lk(m_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  int width() const { return target_; }

  void run(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
    const int w = target_;
    if (n <= 0) return;
    if (w <= 1 || n == 1) {
      fn(0, n);
      return;
    }
    {
      std::unique_lock lk(m_);
      job_ = &fn;
      job_n_ = n;
      pending_ = w - 1;
      ++epoch_;
    }
    cv_.notify_all();
    run_slice(n, 0, w, fn);
    std::unique_lock lk(m_);
    done_cv_.wait(lk, [this] { return pending_ == 0; });
    job_ = nullptr;
  }

 private:
  static void run_slice(int64_t n, int slice, int width,
                        const std::function<void(int64_t, int64_t)>& fn) {
    const int64_t chunk = (n + width - 1) / width;
    const int64_t b = slice * chunk;
    const int64_t e = std::min<int64_t>(n, b + chunk);
    if (b < e) fn(b, e);
  }

  void worker_loop(int slice) {
    tl_in_worker = true;
    uint64_t seen = 0;
    for (;;) {
      const std::function<void(int64_t, int64_t)>* job = nullptr;
      int64_t n = 0;
      {
        std::unique_lock lk(m_);
        cv_.wait(lk, [&] { return stop_ || epoch_ != seen; });
        if (stop_) return;
        seen = epoch_;
        job = job_;
        n = job_n_;
      }
      run_slice(n, slice, target_, *job);
      {
        std::unique_lock lk(m_);
        if (--pending_ == 0) done_cv_.notify_all();
      }
    }
  }

  int target_;
  std::vector<std::thread> threads_;
  std::mutex m_;
  std::condition_variable cv_, done_cv_;
  const std::function<void(int64_t, int64_t)>* job_ = nullptr;
  int64_t job_n_ = 0;
  int pending_ = 0;
  uint64_t epoch_ = 0;
  bool stop_ = false;
};

std::unique_ptr<Pool> g_pool;
int g_workers = 2;
std::mutex g_pool_mutex;

Pool& pool() {
  std::unique_lock lk(g_pool_mutex);
  if (!g_pool || g_pool->width() != g_workers) {
    g_pool.reset();
    g_pool = std::make_unique<Pool>(g_workers);
  }
  return *g_pool;
}

}  // namespace

void set_worker_count(int n) {
  std::unique_lock lk(g_pool_mutex);
  g_workers = n < 1 ? 1 : n;
}

int worker_count() {
  std::unique_lock lk(g_pool_mutex);
  return g_workers;
}

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
  if (tl_in_worker) {  // no nesting: nested calls run inline
    fn(0, n);
    return;
  }
  tl_in_worker = true;
  pool().run(n, fn);
  tl_in_worker = false;
}

}  // namespace bp
