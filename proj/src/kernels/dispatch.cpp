#include <atomic>
#include <cstdlib>
#include <string>

#include "dtwlmnn/kernels.hpp"

namespace dtwlmnn::kernels {

#ifdef DTWLMNN_HAVE_AVX2
const KernelTable* avx2_kernel_table();
#endif

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

const KernelTable* avx2_kernels() {
#if defined(DTWLMNN_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported = __builtin_cpu_supports("avx2") &&
                                __builtin_cpu_supports("fma");
  return supported ? avx2_kernel_table() : nullptr;
#else
  return nullptr;
#endif
}

Isa detected_isa() {
  static const Isa isa = [] {
    const Isa best = avx2_kernels() ? Isa::avx2 : Isa::scalar;
    const char* forced = std::getenv("DTWLMNN_ISA");
    if (forced != nullptr && std::string(forced) == "scalar") {
      return Isa::scalar;
    }
    return best;
  }();
  return isa;
}

namespace {

const KernelTable* table_for(Isa isa) {
  return isa == Isa::avx2 ? avx2_kernels() : &scalar_kernels();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{table_for(detected_isa())};
  return table;
}

}  // namespace

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

bool select_isa(Isa isa) {
  const KernelTable* table = table_for(isa);
  if (table == nullptr) return false;
  current().store(table, std::memory_order_release);
  return true;
}

}  // namespace dtwlmnn::kernels
