#pragma once

#include <cstddef>
#include <functional>

namespace mufnet {

// Worker count: MUFNET_THREADS if set to a positive integer, otherwise the
// hardware concurrency (at least 1).
std::size_t thread_budget();

// Runs body(i) for i in [0, n) on up to `threads` workers. If any call
// throws, the exception from the lowest failing index is rethrown after all
// workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  std::size_t threads = thread_budget());

}  // namespace mufnet
