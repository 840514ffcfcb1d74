#pragma once

#include <cstddef>
#include <functional>

namespace cmt {

// Worker count: hardware concurrency, capped by the CMT_THREADS environment variable.
unsigned worker_threads();

// Calls fn(i) for i in [0, n) on up to `threads` threads. The first exception is rethrown.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace cmt
