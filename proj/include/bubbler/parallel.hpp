#pragma once

#include <cstddef>
#include <functional>

namespace bubbler {

/// Worker count: BUBBLER_THREADS if set and positive, else hardware concurrency.
unsigned worker_count();

/// Runs fn(i) for i in [0, n). Each index runs exactly once; the order of completion is unspecified.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace bubbler
