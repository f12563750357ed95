#include "abfkit/parallel.hpp"

#include <cstdlib>

namespace abfkit {

std::size_t worker_count() {
  if (const char* env = std::getenv("ABFKIT_THREADS")) {
    long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<std::size_t>(n);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace abfkit
