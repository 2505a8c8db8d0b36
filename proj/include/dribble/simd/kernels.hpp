#pragma once

// Dense-layer kernels with a scalar reference implementation and SIMD variants chosen at runtime.
//
// Matrices are row-major. gemm computes C = op(A) * op(B) (+ C when accumulate is set),
// where op(A) is M x K and op(B) is K x N.

#include <cstddef>
#include <string_view>
#include <vector>

namespace dribble::simd {

enum class Isa { kScalar = 0, kAvx2 = 1, kAvx512 = 2 };

std::string_view isa_name(Isa isa);
bool isa_supported(Isa isa);
/// Best supported ISA, unless overridden by force_isa or DRIBBLE_ISA=scalar|avx2|avx512.
Isa active_isa();
/// Pins the ISA for the rest of the process (tests use this to compare variants).
void force_isa(Isa isa);
std::vector<Isa> supported_isas();

template <typename T>
struct KernelTable {
  void (*gemm)(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
               const T* b, std::size_t ldb, bool accumulate, T* c, std::size_t ldc);
  /// c[i, j] += bias[j]
  void (*add_bias)(std::size_t m, std::size_t n, const T* bias, T* c, std::size_t ldc);
  /// out[j] += sum_i x[i, j]
  void (*column_sum)(std::size_t m, std::size_t n, const T* x, std::size_t ldx, T* out);
  /// y = elu(x), alpha = 1
  void (*elu_forward)(std::size_t n, const T* x, T* y);
  /// dx = dy * elu'(x), using y = elu(x): slope 1 where y > 0 else y + 1
  void (*elu_backward)(std::size_t n, const T* y, const T* dy, T* dx);
  /// Adam with bias correction folded into step_size and eps_hat.
  void (*adam_update)(std::size_t n, T* param, const T* grad, T* m, T* v, T beta1, T beta2, T step_size, T eps_hat);
  /// sum of squares
  T (*sum_squares)(std::size_t n, const T* x);
};

template <typename T>
const KernelTable<T>& kernels(Isa isa);

/// Kernels for the active ISA.
template <typename T>
const KernelTable<T>& kernels() {
  return kernels<T>(active_isa());
}

}  // namespace dribble::simd
