#pragma once

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace secure_game {

/// Worker cap: SECURE_GAME_THREADS when set, hardware concurrency otherwise.
inline int max_threads() {
  if (const char* env = std::getenv("SECURE_GAME_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Static-partition parallel loop. fn(index) must write only to slots owned
/// by that index so results do not depend on the schedule.
template <typename Fn>
void parallel_for(long begin, long end, Fn&& fn, int threads = 0) {
  const long count = end - begin;
  if (count <= 0) return;
  int workers = threads > 0 ? threads : max_threads();
  workers = static_cast<int>(std::min<long>(workers, count));
  if (workers <= 1) {
    for (long i = begin; i < end; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  const long chunk = (count + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const long lo = begin + chunk * w;
    const long hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (long i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace secure_game
