#include "dtwlmnn/parallel.hpp"

namespace dtwlmnn {

namespace {
std::atomic<unsigned> g_max_threads{0};
}

void set_max_threads(unsigned threads) { g_max_threads.store(threads); }

unsigned max_threads() {
  const unsigned cap = g_max_threads.load();
  if (cap != 0) return cap;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace dtwlmnn
