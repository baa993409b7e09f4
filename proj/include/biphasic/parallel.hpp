#pragma once

#include <cstdint>
#include <functional>

namespace bp {

// Process-wide worker pool. Work is split into static index ranges so every
// output element is produced by exactly one worker with a fixed inner loop
// order; results are therefore bitwise identical for any worker count.
void set_worker_count(int n);
int worker_count();

// Runs fn(begin, end) over a static partition of [0, n).
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

}  // namespace bp
