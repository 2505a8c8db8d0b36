#pragma once

#include <cstddef>
#include <functional>

namespace dribble {

/// Worker count used by parallel_for. Defaults to the hardware concurrency, overridable
/// with DRIBBLE_THREADS or set_thread_count.
std::size_t thread_count();
void set_thread_count(std::size_t n);

/// Runs fn(i) for i in [0, count). Iterations must touch disjoint data; results never depend
/// on the number of threads.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace dribble
