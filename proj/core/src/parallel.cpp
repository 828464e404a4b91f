#include "sdeblur/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

#include "sdeblur/error.hpp"

namespace sdeblur {
namespace {

std::atomic<unsigned> g_threads{0};

constexpr std::size_t kDotBlock = 2048;

}  // namespace

unsigned thread_count() {
  unsigned t = g_threads.load(std::memory_order_relaxed);
  if (t == 0) {
    t = std::max(1u, std::thread::hardware_concurrency());
  }
  return t;
}

void set_thread_count(unsigned threads) {
  g_threads.store(threads, std::memory_order_relaxed);
}

ScopedThreadCount::ScopedThreadCount(unsigned threads)
    : previous_(g_threads.load(std::memory_order_relaxed)) {
  set_thread_count(threads);
}

ScopedThreadCount::~ScopedThreadCount() { set_thread_count(previous_); }

void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& body) {
  if (n == 0) return;
  const std::size_t workers =
      std::min<std::size_t>(thread_count(), std::max<std::size_t>(1, n / 256));
  if (workers <= 1) {
    body(0, n);
    return;
  }

  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(n, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back([&body, &errors, w, begin, end] {
        try {
          body(begin, end);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    try {
      body(0, std::min(n, chunk));
    } catch (...) {
      errors[0] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

double deterministic_dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "dot product of unequal lengths");
  }
  const std::size_t blocks = (a.size() + kDotBlock - 1) / kDotBlock;
  std::vector<double> partial(blocks, 0.0);
  parallel_for(blocks, [&](std::size_t begin, std::size_t end) {
    for (std::size_t blk = begin; blk < end; ++blk) {
      const std::size_t lo = blk * kDotBlock;
      const std::size_t hi = std::min(a.size(), lo + kDotBlock);
      double s = 0.0;
      for (std::size_t i = lo; i < hi; ++i) s += a[i] * b[i];
      partial[blk] = s;
    }
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace sdeblur
