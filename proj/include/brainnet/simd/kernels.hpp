#pragma once

// Inner-loop arithmetic used by the dense linear algebra. Every kernel has a
// scalar reference version; vector variants are selected once at startup from
// the CPU feature set and must agree with the scalar reference (see
// tests/test_kernels.cpp).

#include <cstddef>
#include <string_view>

namespace brainnet::simd {

struct KernelTable {
  std::string_view name;
  // sum_i x[i] * y[i]
  double (*dot)(const double* x, const double* y, std::size_t n);
  // y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // z[i] = x[i] * y[i]
  void (*hadamard)(const double* x, const double* y, double* z, std::size_t n);
  // y[i] = max(y[i], x[i])
  void (*max_inplace)(const double* x, double* y, std::size_t n);
};

const KernelTable& scalar_kernels();

// nullptr when the variant was not compiled in or the CPU lacks the feature.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

// Table used by the library. Picks the widest supported variant unless the
// environment variable BRAINNET_SIMD is set to "scalar".
const KernelTable& active_kernels();

// Overrides the active table (tests and benchmarking).
void set_active_kernels(const KernelTable& table);

}  // namespace brainnet::simd
