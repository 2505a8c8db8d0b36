// AVX2 + FMA variants. Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "dribble/parallel.hpp"
#include "tables.hpp"

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#define DRIBBLE_HAVE_AVX2 1
#endif

namespace dribble::simd::detail {

#if DRIBBLE_HAVE_AVX2
namespace {

#include "packed_kernels.inl"

struct F32 : ExpConstants<float> {
  using T = float;
  using V = __m256;
  static constexpr std::size_t L = 8, MR = 6, NV = 2;
  static V loadu(const T* p) { return _mm256_loadu_ps(p); }
  static void storeu(T* p, V v) { _mm256_storeu_ps(p, v); }
  static V set1(T x) { return _mm256_set1_ps(x); }
  static V zero() { return _mm256_setzero_ps(); }
  static V add(V a, V b) { return _mm256_add_ps(a, b); }
  static V sub(V a, V b) { return _mm256_sub_ps(a, b); }
  static V mul(V a, V b) { return _mm256_mul_ps(a, b); }
  static V div(V a, V b) { return _mm256_div_ps(a, b); }
  static V fma(V a, V b, V c) { return _mm256_fmadd_ps(a, b, c); }
  static V sqrt(V a) { return _mm256_sqrt_ps(a); }
  static V max(V a, V b) { return _mm256_max_ps(a, b); }
  static V min(V a, V b) { return _mm256_min_ps(a, b); }
  static V round_nearest(V a) { return _mm256_round_ps(a, _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC); }
  static V pow2n(V p, V n) {
    const __m256i e = _mm256_slli_epi32(_mm256_add_epi32(_mm256_cvtps_epi32(n), _mm256_set1_epi32(127)), 23);
    return _mm256_mul_ps(p, _mm256_castsi256_ps(e));
  }
  static V select_positive(V x, V a, V b) { return _mm256_blendv_ps(b, a, _mm256_cmp_ps(x, zero(), _CMP_GT_OQ)); }
};

struct F64 : ExpConstants<double> {
  using T = double;
  using V = __m256d;
  static constexpr std::size_t L = 4, MR = 6, NV = 2;
  static V loadu(const T* p) { return _mm256_loadu_pd(p); }
  static void storeu(T* p, V v) { _mm256_storeu_pd(p, v); }
  static V set1(T x) { return _mm256_set1_pd(x); }
  static V zero() { return _mm256_setzero_pd(); }
  static V add(V a, V b) { return _mm256_add_pd(a, b); }
  static V sub(V a, V b) { return _mm256_sub_pd(a, b); }
  static V mul(V a, V b) { return _mm256_mul_pd(a, b); }
  static V div(V a, V b) { return _mm256_div_pd(a, b); }
  static V fma(V a, V b, V c) { return _mm256_fmadd_pd(a, b, c); }
  static V sqrt(V a) { return _mm256_sqrt_pd(a); }
  static V max(V a, V b) { return _mm256_max_pd(a, b); }
  static V min(V a, V b) { return _mm256_min_pd(a, b); }
  static V round_nearest(V a) { return _mm256_round_pd(a, _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC); }
  static V pow2n(V p, V n) {
    const __m256i k = _mm256_cvtepi32_epi64(_mm256_cvtpd_epi32(n));
    const __m256i e = _mm256_slli_epi64(_mm256_add_epi64(k, _mm256_set1_epi64x(1023)), 52);
    return _mm256_mul_pd(p, _mm256_castsi256_pd(e));
  }
  static V select_positive(V x, V a, V b) { return _mm256_blendv_pd(b, a, _mm256_cmp_pd(x, zero(), _CMP_GT_OQ)); }
};

}  // namespace

bool avx2_compiled() { return true; }

template <>
const KernelTable<float>& avx2_table<float>() {
  return Packed<F32>::table();
}
template <>
const KernelTable<double>& avx2_table<double>() {
  return Packed<F64>::table();
}

#else

bool avx2_compiled() { return false; }

template <>
const KernelTable<float>& avx2_table<float>() {
  return scalar_table<float>();
}
template <>
const KernelTable<double>& avx2_table<double>() {
  return scalar_table<double>();
}

#endif

}  // namespace dribble::simd::detail
