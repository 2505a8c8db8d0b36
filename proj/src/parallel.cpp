#include "dribble/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dribble {

namespace {

thread_local bool t_inside_parallel = false;

class Pool {
 public:
  explicit Pool(std::size_t workers) { resize(workers); }
  ~Pool() { stop(); }

  std::size_t size() const { return workers_.size() + 1; }

  void resize(std::size_t total) {
    stop();
    stopping_ = false;
    for (std::size_t i = 1; i < total; ++i) workers_.emplace_back([this] { work(); });
  }

  void run(std::size_t count, const std::function<void(std::size_t)>& fn) {
    std::unique_lock lock(run_mutex_);
    {
      std::lock_guard g(m_);
      fn_ = &fn;
      count_ = count;
      next_.store(0);
      pending_ = workers_.size();
      error_ = nullptr;
      ++generation_;
    }
    cv_.notify_all();
    drain();
    std::unique_lock g(m_);
    done_cv_.wait(g, [this] { return pending_ == 0; });
    fn_ = nullptr;
    if (error_) std::rethrow_exception(error_);
  }

 private:
  void drain() {
    t_inside_parallel = true;
    for (std::size_t i = next_.fetch_add(1); i < count_; i = next_.fetch_add(1)) {
      try {
        (*fn_)(i);
      } catch (...) {
        std::lock_guard g(m_);
        if (!error_) error_ = std::current_exception();
      }
    }
    t_inside_parallel = false;
  }

  void work() {
    std::size_t seen = 0;
    for (;;) {
      {
        std::unique_lock g(m_);
        cv_.wait(g, [&] { return stopping_ || generation_ != seen; });
        if (stopping_) return;
        seen = generation_;
      }
      drain();
      {
        std::lock_guard g(m_);
        --pending_;
      }
      done_cv_.notify_one();
    }
  }

  void stop() {
    {
      std::lock_guard g(m_);
      stopping_ = true;
    }
    cv_.notify_all();
    for (auto& t : workers_) t.join();
    workers_.clear();
  }

  std::vector<std::thread> workers_;
  std::mutex run_mutex_;
  std::mutex m_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::function<void(std::size_t)>* fn_ = nullptr;
  std::size_t count_ = 0;
  std::atomic<std::size_t> next_{0};
  std::size_t pending_ = 0;
  std::size_t generation_ = 0;
  bool stopping_ = false;
  std::exception_ptr error_;
};

std::size_t default_threads() {
  if (const char* env = std::getenv("DRIBBLE_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n > 0) return static_cast<std::size_t>(n);
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

Pool& pool() {
  static Pool p(default_threads());
  return p;
}

}  // namespace

std::size_t thread_count() { return pool().size(); }

void set_thread_count(std::size_t n) { pool().resize(n == 0 ? 1 : n); }

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  Pool& p = pool();
  if (p.size() == 1 || count == 1 || t_inside_parallel) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  p.run(count, fn);
}

}  // namespace dribble
