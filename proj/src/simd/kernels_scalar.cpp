// Reference kernels. This translation unit is built without -mavx2/-mfma so
// the compiler cannot contract a * b + c into a fused operation.

#include "mgnet/simd/kernels.hpp"

namespace mgnet::simd {
namespace {

void axpy(float* y, const float* x, float a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

float dot(const float* a, const float* b, std::size_t n) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void add(const float* a, const float* b, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub(const float* a, const float* b, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void relu(const float* x, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward(const float* x, const float* gy, float* gx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) gx[i] += x[i] > 0.0f ? gy[i] : 0.0f;
}

void accumulate(float* y, const float* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}

void scale(float* y, float a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] *= a;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable kTable{Isa::kScalar, "scalar", axpy, dot, add, sub,
                                  relu, relu_backward, accumulate, scale};
  return kTable;
}

}  // namespace mgnet::simd
