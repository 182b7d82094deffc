// Copyright 2026 The trigrid Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace trigrid {

/// Number of workers used when a caller asks for "all cores".
inline int default_worker_count() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

/// Static partition of [0, n) into `workers` contiguous ranges; calls
/// fn(worker, begin, end) for each non-empty range. Worker 0 runs on the
/// calling thread. The partition depends only on (n, workers), so per-worker
/// accumulators merged in worker order give bitwise-reproducible reductions
/// for a fixed worker count.
template <typename Fn>
void parallel_ranges(std::size_t n, int workers, Fn&& fn) {
  workers = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::size_t>(n, 1))));
  if (workers == 1) {
    if (n > 0) fn(0, std::size_t{0}, n);
    return;
  }
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> threads;
    threads.reserve(workers - 1);
    for (int w = 1; w < workers; ++w) {
      const std::size_t begin = std::min(n, chunk * w);
      const std::size_t end = std::min(n, begin + chunk);
      if (begin >= end) continue;
      threads.emplace_back([&, w, begin, end] {
        try {
          fn(w, begin, end);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    try {
      fn(0, std::size_t{0}, std::min(n, chunk));
    } catch (...) {
      errors[0] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace trigrid
