#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace mcsbn {

inline unsigned default_threads() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

// Static contiguous partition of [0, n) across nthreads. fn(begin, end, tid).
// The partition depends only on (n, nthreads), so any merge done in tid order
// is deterministic for a fixed thread count.
template <typename Fn>
void parallel_chunks(size_t n, unsigned nthreads, Fn fn) {
  if (n == 0) return;
  nthreads = std::max(1u, std::min<unsigned>(nthreads, static_cast<unsigned>(n)));
  if (nthreads == 1) {
    fn(size_t{0}, n, 0u);
    return;
  }
  size_t chunk = (n + nthreads - 1) / nthreads;
  std::vector<std::thread> workers;
  workers.reserve(nthreads - 1);
  for (unsigned t = 1; t < nthreads; ++t) {
    size_t b = std::min(n, t * chunk), e = std::min(n, (t + 1) * chunk);
    if (b >= e) continue;
    workers.emplace_back([=] { fn(b, e, t); });
  }
  fn(size_t{0}, std::min(n, chunk), 0u);
  for (auto& w : workers) w.join();
}

} // namespace mcsbn
