#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace sa {

// Static block partition over [0, n). Each index must write only its own
// output slot, so results are identical at any thread count.
inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    int begin = static_cast<int>(static_cast<long long>(n) * t / threads);
    int end = static_cast<int>(static_cast<long long>(n) * (t + 1) / threads);
    pool.emplace_back([&fn, begin, end] {
      for (int i = begin; i < end; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace sa
