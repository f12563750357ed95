#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace abfkit {

std::size_t worker_count();

/// Splits [0, count) into contiguous blocks in a fixed order and runs
/// `fn(block_index, begin, end)` for each, on worker threads when
/// `parallel` is set. Block boundaries depend only on `count` and
/// `block_count`, so per-block results can be reduced deterministically.
template <class Fn>
void for_each_block(std::size_t count, std::size_t block_count, bool parallel,
                    Fn&& fn) {
  if (count == 0) return;
  block_count = std::clamp<std::size_t>(block_count, 1, count);
  auto bounds = [&](std::size_t b) {
    return std::pair{count * b / block_count, count * (b + 1) / block_count};
  };
  std::size_t workers = parallel ? std::min(worker_count(), block_count) : 1;
  if (workers <= 1) {
    for (std::size_t b = 0; b < block_count; ++b) {
      auto [begin, end] = bounds(b);
      fn(b, begin, end);
    }
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (std::size_t b = w; b < block_count; b += workers) {
          auto [begin, end] = bounds(b);
          fn(b, begin, end);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace abfkit
