#pragma once

#include <cstddef>
#include <functional>

namespace slmc {

// Worker count from SLMC_WORKERS (>= 1); defaults to 1.
int worker_count();

// Runs fn(0..n-1) on the worker pool. Each index owns its output slot and
// rng stream, so results do not depend on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace slmc
