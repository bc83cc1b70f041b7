#pragma once

#include <cstdint>
#include <functional>

namespace ssrl {

// Resolves a worker count: `requested` <= 0 means "use the hardware", and the
// SSRL_THREADS environment variable caps whatever was requested.
int resolve_threads(int requested);

// Splits [0, n_items) into a fixed number of contiguous chunks and runs
// `chunk_fn(chunk_index, begin, end)` for each. The chunk structure depends
// only on n_items (never on the thread count), and every chunk processes its
// items in ascending order, so per-chunk partial results are bit-identical
// across thread counts. Reduce the partials in chunk-index order to get fully
// deterministic floating-point sums.
//
// threads <= 1 runs the serial reference path (no OpenMP), which produces the
// same chunk structure and therefore identical results.
inline constexpr int kExecChunks = 32;

int chunk_count(std::int64_t n_items);

void run_chunked(std::int64_t n_items, int threads,
                 const std::function<void(int chunk, std::int64_t begin, std::int64_t end)>& chunk_fn);

// Convenience: parallel map over independent items writing into per-item
// slots. Order of execution is irrelevant for correctness.
void run_items(std::int64_t n_items, int threads,
               const std::function<void(std::int64_t item)>& item_fn);

}  // namespace ssrl
