#pragma once

#include <cstddef>
#include <functional>

namespace faceret {

// Machine parallelism, at least 1.
std::size_t default_thread_count();

// Calls fn(i) for i in [0, n) on up to `threads` workers. Work items are
// handed out dynamically, so callers write results into slot i to keep the
// output independent of scheduling. If any call throws, the exception from
// the lowest index is rethrown after all workers finish.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace faceret
