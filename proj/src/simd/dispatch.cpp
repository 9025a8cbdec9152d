#include <atomic>
#include <cstdlib>
#include <string_view>

#include "brainnet/simd/kernels.hpp"

namespace brainnet::simd {
namespace {

const KernelTable* pick_default() {
  if (const char* env = std::getenv("BRAINNET_SIMD"); env && std::string_view(env) == "scalar") {
    return &scalar_kernels();
  }
  if (const KernelTable* t = avx2_kernels()) return t;
  if (const KernelTable* t = neon_kernels()) return t;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{pick_default()};
  return slot;
}

}  // namespace

const KernelTable& active_kernels() { return *active_slot().load(std::memory_order_relaxed); }

void set_active_kernels(const KernelTable& table) {
  active_slot().store(&table, std::memory_order_relaxed);
}

}  // namespace brainnet::simd
