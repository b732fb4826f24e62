#pragma once

#include <cstddef>
#include <functional>

namespace bceid {

/// Worker count from BCEID_THREADS, else the hardware concurrency (>= 1).
std::size_t thread_count();

/// Splits [0, count) into contiguous chunks, one per worker, and runs
/// body(begin, end) on each. The chunking depends only on `count` and the
/// worker count. The first exception thrown by a worker is rethrown.
void parallel_for(std::size_t count,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace bceid
