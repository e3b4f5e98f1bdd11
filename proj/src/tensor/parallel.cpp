#include "mgnet/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "mgnet/errors.hpp"

namespace mgnet {
namespace {

// Persistent pool; one job at a time. parallel_for is not reentrant: a body
// that calls parallel_for again runs the inner loop inline.
class Pool {
 public:
  ~Pool() { resize(0); }

  void resize(int workers) {
    {
      std::unique_lock lock(mu_);
      stop_ = true;
      ++generation_;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
    threads_.clear();
    stop_ = false;
    const std::uint64_t start = generation_;
    for (int w = 0; w < workers; ++w) {
      threads_.emplace_back([this, w, start] { worker_loop(w + 1, start); });
    }
  }

  int workers() const { return static_cast<int>(threads_.size()); }

  void run(std::size_t n, const std::function<void(std::size_t)>& body) {
    const int participants = workers() + 1;
    {
      std::unique_lock lock(mu_);
      body_ = &body;
      n_ = n;
      participants_ = participants;
      pending_ = workers();
      error_ = nullptr;
      ++generation_;
    }
    cv_.notify_all();
    run_chunk(0, body, n, participants);
    std::unique_lock lock(mu_);
    done_cv_.wait(lock, [this] { return pending_ == 0; });
    body_ = nullptr;
    if (error_) std::rethrow_exception(error_);
  }

 private:
  static void run_chunk(int slot, const std::function<void(std::size_t)>& body,
                        std::size_t n, int participants) {
    const std::size_t per = (n + participants - 1) / participants;
    const std::size_t begin = std::min(n, per * slot);
    const std::size_t end = std::min(n, begin + per);
    for (std::size_t i = begin; i < end; ++i) body(i);
  }

  void worker_loop(int slot, std::uint64_t seen) {
    for (;;) {
      const std::function<void(std::size_t)>* body = nullptr;
      std::size_t n = 0;
      int participants = 0;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return generation_ != seen; });
        seen = generation_;
        if (stop_) return;
        body = body_;
        n = n_;
        participants = participants_;
      }
      std::exception_ptr err;
      try {
        run_chunk(slot, *body, n, participants);
      } catch (...) {
        err = std::current_exception();
      }
      {
        std::unique_lock lock(mu_);
        if (err && !error_) error_ = err;
        --pending_;
      }
      done_cv_.notify_one();
    }
  }

  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  std::vector<std::thread> threads_;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
  const std::function<void(std::size_t)>* body_ = nullptr;
  std::size_t n_ = 0;
  int participants_ = 1;
  int pending_ = 0;
  std::exception_ptr error_;
};

Pool& pool() {
  static Pool p;
  return p;
}

std::mutex& run_mutex() {
  static std::mutex m;
  return m;
}

thread_local bool t_inside_parallel = false;
std::atomic<int> g_threads{1};

}  // namespace

void set_num_threads(int n) {
  if (n < 1) throw ArgumentError("thread count must be >= 1");
  std::lock_guard lock(run_mutex());
  pool().resize(n - 1);
  g_threads = n;
}

int num_threads() { return g_threads.load(); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  if (n == 0) return;
  if (g_threads.load() <= 1 || n == 1 || t_inside_parallel) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::lock_guard lock(run_mutex());
  t_inside_parallel = true;
  struct Reset {
    ~Reset() { t_inside_parallel = false; }
  } reset;
  pool().run(n, [&body](std::size_t i) {
    t_inside_parallel = true;
    body(i);
  });
}

}  // namespace mgnet
