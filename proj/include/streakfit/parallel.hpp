#pragma once

#include <cstddef>
#include <functional>

namespace streakfit {

/// Worker count: hardware concurrency capped by the STREAKFIT_THREADS
/// environment variable when set. Always >= 1.
int default_worker_count();

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Work is handed out
/// by index, so results written to per-index slots are deterministic. The
/// first exception thrown by any task is rethrown after all workers join.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace streakfit
