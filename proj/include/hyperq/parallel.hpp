#pragma once

#include <cstddef>
#include <functional>

namespace hyperq {

/// Runs fn(i) for every i in [0, n) on up to `workers` threads (0 means
/// hardware concurrency). Indices are claimed in increasing order; the first
/// exception thrown by any task is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace hyperq
