#pragma once

#include <cstddef>
#include <functional>

namespace tfb {

/// Hardware concurrency, capped by the TFB_THREADS environment variable
/// when it holds a positive integer. Always at least 1.
unsigned worker_count();

/// Calls body(i) for i in [0, count) on up to `workers` threads (0 means
/// worker_count()). Each index runs exactly once; the first exception
/// thrown by any body is rethrown after all workers finish.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body,
                  unsigned workers = 0);

}  // namespace tfb
