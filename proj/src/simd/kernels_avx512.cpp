// AVX-512F variants. Compiled with -mavx512f -mfma; only reached after a runtime CPU check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "dribble/parallel.hpp"
#include "tables.hpp"

#if defined(__AVX512F__)
#include <immintrin.h>
#define DRIBBLE_HAVE_AVX512 1
#endif

namespace dribble::simd::detail {

#if DRIBBLE_HAVE_AVX512
namespace {

#include "packed_kernels.inl"

struct F32 : ExpConstants<float> {
  using T = float;
  using V = __m512;
  static constexpr std::size_t L = 16, MR = 12, NV = 2;
  static V loadu(const T* p) { return _mm512_loadu_ps(p); }
  static void storeu(T* p, V v) { _mm512_storeu_ps(p, v); }
  static V set1(T x) { return _mm512_set1_ps(x); }
  static V zero() { return _mm512_setzero_ps(); }
  static V add(V a, V b) { return _mm512_add_ps(a, b); }
  static V sub(V a, V b) { return _mm512_sub_ps(a, b); }
  static V mul(V a, V b) { return _mm512_mul_ps(a, b); }
  static V div(V a, V b) { return _mm512_div_ps(a, b); }
  static V fma(V a, V b, V c) { return _mm512_fmadd_ps(a, b, c); }
  static V sqrt(V a) { return _mm512_sqrt_ps(a); }
  static V max(V a, V b) { return _mm512_max_ps(a, b); }
  static V min(V a, V b) { return _mm512_min_ps(a, b); }
  static V round_nearest(V a) { return _mm512_roundscale_ps(a, _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC); }
  static V pow2n(V p, V n) { return _mm512_scalef_ps(p, n); }
  static V select_positive(V x, V a, V b) {
    return _mm512_mask_blend_ps(_mm512_cmp_ps_mask(x, zero(), _CMP_GT_OQ), b, a);
  }
};

struct F64 : ExpConstants<double> {
  using T = double;
  using V = __m512d;
  static constexpr std::size_t L = 8, MR = 12, NV = 2;
  static V loadu(const T* p) { return _mm512_loadu_pd(p); }
  static void storeu(T* p, V v) { _mm512_storeu_pd(p, v); }
  static V set1(T x) { return _mm512_set1_pd(x); }
  static V zero() { return _mm512_setzero_pd(); }
  static V add(V a, V b) { return _mm512_add_pd(a, b); }
  static V sub(V a, V b) { return _mm512_sub_pd(a, b); }
  static V mul(V a, V b) { return _mm512_mul_pd(a, b); }
  static V div(V a, V b) { return _mm512_div_pd(a, b); }
  static V fma(V a, V b, V c) { return _mm512_fmadd_pd(a, b, c); }
  static V sqrt(V a) { return _mm512_sqrt_pd(a); }
  static V max(V a, V b) { return _mm512_max_pd(a, b); }
  static V min(V a, V b) { return _mm512_min_pd(a, b); }
  static V round_nearest(V a) { return _mm512_roundscale_pd(a, _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC); }
  static V pow2n(V p, V n) { return _mm512_scalef_pd(p, n); }
  static V select_positive(V x, V a, V b) {
    return _mm512_mask_blend_pd(_mm512_cmp_pd_mask(x, zero(), _CMP_GT_OQ), b, a);
  }
};

}  // namespace

bool avx512_compiled() { return true; }

template <>
const KernelTable<float>& avx512_table<float>() {
  return Packed<F32>::table();
}
template <>
const KernelTable<double>& avx512_table<double>() {
  return Packed<F64>::table();
}

#else

bool avx512_compiled() { return false; }

template <>
const KernelTable<float>& avx512_table<float>() {
  return scalar_table<float>();
}
template <>
const KernelTable<double>& avx512_table<double>() {
  return scalar_table<double>();
}

#endif

}  // namespace dribble::simd::detail
