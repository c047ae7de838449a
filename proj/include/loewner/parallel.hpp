#pragma once

#include <atomic>
#include <thread>
#include <vector>

namespace loewner {

// Deterministic fan-out: body(i) runs once for each i in [begin, end), with
// results written to caller-owned slots indexed by i. Scheduling order never
// affects output bytes.
template <typename Body>
void parallel_for(int begin, int end, int threads, Body&& body) {
  if (end <= begin) return;
  if (threads <= 1 || end - begin == 1) {
    for (int i = begin; i < end; ++i) body(i);
    return;
  }
  std::atomic<int> next(begin);
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= end) return;
      body(i);
    }
  };
  std::vector<std::thread> pool;
  const unsigned hw = std::thread::hardware_concurrency();
  int k = threads;
  if (hw > 0 && k > static_cast<int>(2 * hw)) k = static_cast<int>(2 * hw);
  pool.reserve(static_cast<std::size_t>(k));
  for (int w = 0; w < k; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

}  // namespace loewner
