#pragma once

// Inner-loop kernels used by the tensor engine. Each instruction set
// provides one table; the active table is picked once at startup from
// CPUID (override with MGNET_SIMD=scalar|avx2) and can be switched
// explicitly in tests.
//
// Elementwise kernels (add, sub, relu, relu_backward, accumulate, scale)
// are bitwise identical across tables. axpy and dot may differ in the last
// bits because the AVX2 table uses fused multiply-add and a lane-split
// reduction; within one table the reduction order is fixed.

#include <cstddef>
#include <string_view>

namespace mgnet::simd {

enum class Isa { kScalar, kAvx2 };

struct KernelTable {
  Isa isa;
  const char* name;
  /// y[i] += a * x[i]
  void (*axpy)(float* y, const float* x, float a, std::size_t n);
  /// sum_i a[i] * b[i]
  float (*dot)(const float* a, const float* b, std::size_t n);
  void (*add)(const float* a, const float* b, float* out, std::size_t n);
  void (*sub)(const float* a, const float* b, float* out, std::size_t n);
  void (*relu)(const float* x, float* out, std::size_t n);
  /// gx[i] += (x[i] > 0) ? gy[i] : 0
  void (*relu_backward)(const float* x, const float* gy, float* gx, std::size_t n);
  /// y[i] += x[i]
  void (*accumulate)(float* y, const float* x, std::size_t n);
  /// y[i] *= a
  void (*scale)(float* y, float a, std::size_t n);
};

const KernelTable& scalar_table();
/// Only valid when supported(Isa::kAvx2).
const KernelTable& avx2_table();

bool supported(Isa isa);
const KernelTable& table(Isa isa);

/// The table used by the tensor engine.
const KernelTable& active();
void select(Isa isa);
Isa best_supported();

std::string_view isa_name(Isa isa);

/// Restores the previous selection on scope exit.
class ScopedIsa {
 public:
  explicit ScopedIsa(Isa isa);
  ~ScopedIsa();
  ScopedIsa(const ScopedIsa&) = delete;
  ScopedIsa& operator=(const ScopedIsa&) = delete;

 private:
  Isa previous_;
};

}  // namespace mgnet::simd
