#pragma once

// Deterministic parallelism helpers.  The contract used throughout: work is cut
// into a chunk decomposition that depends only on the problem size, chunk
// partials are stored per chunk index, and the final merge walks chunks in
// index order.  Results are therefore bit-identical for any worker count,
// including 1.

#include <cstdint>
#include <functional>

namespace cutofflab {

// Number of workers to use: min(hardware, CUTOFFLAB_THREADS if set).
int hardware_threads();

// requested == 0 picks hardware_threads(); otherwise min(requested, env cap).
int resolve_threads(int requested);

// Runs body(chunk_index) for chunk_index in [0, chunks); chunks are handed to
// workers dynamically, so only code writing to disjoint, chunk-indexed state
// should run inside.  Exceptions propagate (first one wins).
void parallel_chunks(std::int64_t chunks, int threads,
                     const std::function<void(std::int64_t)>& body);

// Kahan compensated accumulator; used for every floating-point reduction that
// feeds a documented tolerance.
struct Kahan {
  double sum = 0.0;
  double carry = 0.0;

  void add(double x) {
    const double y = x - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }

  double get() const { return sum; }
};

// Fixed chunk decomposition of [0, total): returns chunk count (>= 1) chosen
// from the problem size alone.
std::int64_t chunk_count(std::int64_t total);

// Bounds of chunk c out of `chunks` over [0, total).
std::pair<std::int64_t, std::int64_t> chunk_bounds(std::int64_t total,
                                                   std::int64_t chunks,
                                                   std::int64_t c);

// Deterministic parallel sum of fn(begin, end) over a fixed chunking of
// [0, total); per-chunk results are merged in chunk order with Kahan.
double reduce_chunked(std::int64_t total, int threads,
                      const std::function<double(std::int64_t, std::int64_t)>& fn);

}  // namespace cutofflab
