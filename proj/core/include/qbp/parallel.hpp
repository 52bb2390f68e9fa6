#pragma once

#include <cstdint>
#include <functional>

namespace qbp {

/// Global worker cap for parallel_for. 0 = use hardware concurrency.
/// Set once at program start (e.g. from --threads / QBS_THREADS).
void set_thread_count(int n);
int thread_count();

/// Runs fn(i) for i in [begin, end). Work is split into contiguous chunks.
/// Every iteration must write only state owned by its own index, so results
/// are identical for any worker count; reductions belong to the caller, who
/// must combine per-index results in index order.
void parallel_for(int64_t begin, int64_t end, const std::function<void(int64_t)>& fn);

}  // namespace qbp
