#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace sdeblur {

/// Number of worker threads used by data-parallel kernels. Defaults to the
/// hardware concurrency. Results never depend on this value.
unsigned thread_count();
void set_thread_count(unsigned threads);

/// RAII override of the thread count for the current scope.
class ScopedThreadCount {
 public:
  explicit ScopedThreadCount(unsigned threads);
  ~ScopedThreadCount();
  ScopedThreadCount(const ScopedThreadCount&) = delete;
  ScopedThreadCount& operator=(const ScopedThreadCount&) = delete;

 private:
  unsigned previous_;
};

/// Calls body(begin, end) over contiguous chunks covering [0, n). Chunks are
/// disjoint, so bodies writing only to their own indices are race-free.
void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& body);

/// Dot product with a fixed blocked summation order: the result is
/// bit-identical for every thread count.
double deterministic_dot(std::span<const double> a, std::span<const double> b);

inline double deterministic_norm2(std::span<const double> a) {
  return deterministic_dot(a, a);
}

}  // namespace sdeblur
