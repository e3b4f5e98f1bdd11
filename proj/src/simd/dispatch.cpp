#include <atomic>
#include <cstdlib>
#include <string_view>

#include "mgnet/errors.hpp"
#include "mgnet/simd/kernels.hpp"

namespace mgnet::simd {
namespace {

bool cpu_has_avx2() {
#if (defined(__x86_64__) || defined(_M_X64)) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa initial_isa() {
  const Isa best = best_supported();
  if (const char* env = std::getenv("MGNET_SIMD")) {
    const std::string_view requested(env);
    if (requested == "scalar") return Isa::kScalar;
    if (requested == "avx2" && supported(Isa::kAvx2)) return Isa::kAvx2;
  }
  return best;
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{&table(initial_isa())};
  return slot;
}

}  // namespace

bool supported(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2: {
      static const bool has = cpu_has_avx2();
      return has;
    }
  }
  return false;
}

Isa best_supported() { return supported(Isa::kAvx2) ? Isa::kAvx2 : Isa::kScalar; }

const KernelTable& table(Isa isa) {
  if (!supported(isa)) {
    throw ArgumentError("instruction set not supported on this CPU: " +
                        std::string(isa_name(isa)));
  }
  return isa == Isa::kAvx2 ? avx2_table() : scalar_table();
}

const KernelTable& active() { return *active_slot().load(std::memory_order_acquire); }

void select(Isa isa) { active_slot().store(&table(isa), std::memory_order_release); }

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
  }
  return "unknown";
}

ScopedIsa::ScopedIsa(Isa isa) : previous_(active().isa) { select(isa); }

ScopedIsa::~ScopedIsa() { select(previous_); }

}  // namespace mgnet::simd
