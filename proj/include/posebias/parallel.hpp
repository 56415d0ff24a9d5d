#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace posebias {

// Runs body(worker, begin, end) over `jobs` contiguous chunks of [0, n).
// Chunk boundaries depend only on n and jobs. The exception from the lowest
// worker index, if any, is rethrown after all workers finish.
template <typename Body>
void parallel_chunks(std::size_t n, int jobs, Body &&body) {
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)),
                                                      std::max<std::size_t>(n, 1)));
  if (workers == 1) {
    body(std::size_t{0}, std::size_t{0}, n);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = n * w / workers;
    const std::size_t end = n * (w + 1) / workers;
    threads.emplace_back([&, w, begin, end] {
      try {
        body(w, begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto &t : threads) t.join();
  for (auto &e : errors)
    if (e) std::rethrow_exception(e);
}

inline std::size_t chunk_count(std::size_t n, int jobs) {
  return std::max<std::size_t>(
      1, std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)),
                               std::max<std::size_t>(n, 1)));
}

}  // namespace posebias
