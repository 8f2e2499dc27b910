#pragma once

#include <atomic>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace celnet {

enum class ErrorCode : int {
  ok = 0,
  invalid_argument = 1,
  io = 2,
  bad_state = 3,
  internal = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

inline std::string strformat(const char* fmt, ...) {
  va_list args;
  va_start(args, fmt);
  char buf[1024];
  std::vsnprintf(buf, sizeof(buf), fmt, args);
  va_end(args);
  return std::string(buf);
}

#define CELNET_CHECK(cond, code, ...)                                  \
  do {                                                                 \
    if (!(cond)) ::celnet::fail((code), ::celnet::strformat(__VA_ARGS__)); \
  } while (0)

#define CELNET_CHECK_ARG(cond, ...) CELNET_CHECK(cond, ::celnet::ErrorCode::invalid_argument, __VA_ARGS__)
#define CELNET_CHECK_IO(cond, ...) CELNET_CHECK(cond, ::celnet::ErrorCode::io, __VA_ARGS__)
#define CELNET_CHECK_STATE(cond, ...) CELNET_CHECK(cond, ::celnet::ErrorCode::bad_state, __VA_ARGS__)

// ---------------------------------------------------------------------------
// Deterministic RNG. std::mt19937 with library-defined distributions is not
// bit-stable across standard libraries, so the distributions are hand-rolled.

struct Rng {
  explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

  uint64_t next_u64() {
    // splitmix64
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [0, n).
  uint64_t below(uint64_t n) { return n ? next_u64() % n : 0; }

  int range(int lo, int hi_inclusive) {
    return lo + int(below(uint64_t(hi_inclusive - lo + 1)));
  }

  double normal() {
    // Box-Muller; one value per call keeps the stream simple to reason about.
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // Derive an independent stream; used for per-epoch / per-image substreams.
  Rng fork(uint64_t salt) const {
    Rng r(state_ ^ (0xd1342543de82ef95ull * (salt + 1)));
    r.next_u64();
    return r;
  }

  uint64_t state_;
};

// ---------------------------------------------------------------------------
// Static-partition parallel for. Chunk assignment depends only on the worker
// count, so writes to disjoint slots and fixed-order reductions stay
// deterministic run to run.

inline int worker_count() {
  static int n = [] {
    if (const char* env = std::getenv("CELNET_THREADS")) {
      int v = std::atoi(env);
      if (v > 0) return v;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return int(hw ? hw : 1);
  }();
  return n;
}

// body(worker_index, begin, end)
template <typename Body>
void parallel_chunks(int64_t n, const Body& body) {
  int workers = worker_count();
  if (n <= 0) return;
  if (workers <= 1 || n == 1) {
    body(0, int64_t(0), n);
    return;
  }
  if (int64_t(workers) > n) workers = int(n);
  std::vector<std::thread> threads;
  threads.reserve(size_t(workers));
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  std::mutex err_mutex;
  for (int t = 0; t < workers; ++t) {
    int64_t begin = n * t / workers;
    int64_t end = n * (t + 1) / workers;
    threads.emplace_back([&, t, begin, end] {
      try {
        body(t, begin, end);
      } catch (...) {
        if (!failed.exchange(true)) {
          std::lock_guard<std::mutex> lk(err_mutex);
          first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

template <typename Body>
void parallel_for(int64_t n, const Body& body) {
  parallel_chunks(n, [&](int, int64_t begin, int64_t end) {
    for (int64_t i = begin; i < end; ++i) body(i);
  });
}

}  // namespace celnet
