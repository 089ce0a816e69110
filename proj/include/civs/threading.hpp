#pragma once

#include <cstdint>
#include <functional>

namespace civs {

// Global worker count for the embarrassingly parallel loops in the library
// (per-slice FFT batches, per-frequency solves, per-patch coding). 1 means
// fully serial. The setting is process-wide and cheap to change.
void set_num_threads(int n);
int num_threads();

// Runs fn(i) for i in [0, n). With more than one worker the index range is
// split into fixed contiguous chunks, so the assignment of work to threads
// is deterministic. fn must write only to locations owned by index i; no
// cross-index reductions are performed here.
void parallel_for(int64_t n, const std::function<void(int64_t)>& fn);

}  // namespace civs
