#include "cutofflab/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace cutofflab {

int hardware_threads() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  if (const char* env = std::getenv("CUTOFFLAB_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) hw = std::min(hw, cap);
  }
  return hw;
}

int resolve_threads(int requested) {
  const int hw = hardware_threads();
  if (requested <= 0) return hw;
  return std::min(requested, hw);
}

void parallel_chunks(std::int64_t chunks, int threads,
                     const std::function<void(std::int64_t)>& body) {
  threads = resolve_threads(threads);
  if (chunks <= 0) return;
  if (threads <= 1 || chunks == 1) {
    for (std::int64_t c = 0; c < chunks; ++c) body(c);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::int64_t c = next.fetch_add(1, std::memory_order_relaxed);
      if (c >= chunks) return;
      try {
        body(c);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const int n = static_cast<int>(std::min<std::int64_t>(threads, chunks));
  pool.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::int64_t chunk_count(std::int64_t total) {
  // ~64k elements per chunk, capped so partial buffers stay small; depends on
  // `total` only, never on the worker count.
  if (total <= 0) return 1;
  return std::clamp<std::int64_t>(total / 65536, 1, 4096);
}

std::pair<std::int64_t, std::int64_t> chunk_bounds(std::int64_t total,
                                                   std::int64_t chunks,
                                                   std::int64_t c) {
  const std::int64_t lo = total * c / chunks;
  const std::int64_t hi = total * (c + 1) / chunks;
  return {lo, hi};
}

double reduce_chunked(std::int64_t total, int threads,
                      const std::function<double(std::int64_t, std::int64_t)>& fn) {
  const std::int64_t chunks = chunk_count(total);
  std::vector<double> partial(static_cast<std::size_t>(chunks), 0.0);
  parallel_chunks(chunks, threads, [&](std::int64_t c) {
    const auto [lo, hi] = chunk_bounds(total, chunks, c);
    partial[static_cast<std::size_t>(c)] = fn(lo, hi);
  });
  Kahan acc;
  for (double v : partial) acc.add(v);
  return acc.get();
}

}  // namespace cutofflab
