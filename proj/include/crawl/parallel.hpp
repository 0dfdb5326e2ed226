#pragma once

#include <cstdint>
#include <functional>

namespace crawl {

int num_threads();
void set_num_threads(int n);

// Calls fn(begin, end) over a partition of [0, n) into n_chunks contiguous
// ranges. Chunk boundaries depend only on n and n_chunks, never on the thread
// count, so reductions that accumulate per-chunk and combine in chunk order
// are bit-reproducible under any parallelism.
void parallel_chunks(int64_t n, int n_chunks,
                     const std::function<void(int chunk, int64_t begin, int64_t end)>& fn);

// fn(i) for i in [0, n); fn must write only state owned by index i.
void parallel_for(int64_t n, const std::function<void(int64_t)>& fn);

// Fixed chunk count used for deterministic gradient reductions.
constexpr int kReduceChunks = 64;

}  // namespace crawl
