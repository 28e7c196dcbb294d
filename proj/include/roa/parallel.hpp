#pragma once

#include <cstddef>
#include <functional>

namespace roa {

/// Worker count: ROA_THREADS when set to a positive integer, otherwise the
/// hardware concurrency.
unsigned thread_count();

/// Runs body(i) for i in [0, n) over contiguous chunks. Each index must
/// write only its own output slot; results are then independent of the
/// thread count. The first exception thrown by any chunk is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace roa
