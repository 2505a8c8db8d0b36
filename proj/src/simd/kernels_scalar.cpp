// Scalar reference kernels. Straightforward loops; every SIMD variant is tested against these.

#include <cmath>
#include <cstddef>

#include "tables.hpp"

namespace dribble::simd::detail {

namespace {

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
          const T* b, std::size_t ldb, bool accumulate, T* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    T* ci = c + i * ldc;
    if (!accumulate) {
      for (std::size_t j = 0; j < n; ++j) ci[j] = T(0);
    }
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = trans_a ? a[p * lda + i] : a[i * lda + p];
      if (trans_b) {
        for (std::size_t j = 0; j < n; ++j) ci[j] += aip * b[j * ldb + p];
      } else {
        const T* bp = b + p * ldb;
        for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
      }
    }
  }
}

template <typename T>
void add_bias(std::size_t m, std::size_t n, const T* bias, T* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] += bias[j];
  }
}

template <typename T>
void column_sum(std::size_t m, std::size_t n, const T* x, std::size_t ldx, T* out) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j] += x[i * ldx + j];
  }
}

template <typename T>
void elu_forward(std::size_t n, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : std::expm1(x[i]);
}

template <typename T>
void elu_backward(std::size_t n, const T* y, const T* dy, T* dx) {
  for (std::size_t i = 0; i < n; ++i) dx[i] = y[i] > T(0) ? dy[i] : dy[i] * (y[i] + T(1));
}

template <typename T>
void adam_update(std::size_t n, T* param, const T* grad, T* m, T* v, T beta1, T beta2, T step_size, T eps_hat) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (T(1) - beta1) * grad[i];
    v[i] = beta2 * v[i] + (T(1) - beta2) * grad[i] * grad[i];
    param[i] -= step_size * m[i] / (std::sqrt(v[i]) + eps_hat);
  }
}

template <typename T>
T sum_squares(std::size_t n, const T* x) {
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
  return s;
}

}  // namespace

template <typename T>
const KernelTable<T>& scalar_table() {
  static const KernelTable<T> table{&gemm<T>,        &add_bias<T>,    &column_sum<T>, &elu_forward<T>,
                                    &elu_backward<T>, &adam_update<T>, &sum_squares<T>};
  return table;
}

template const KernelTable<float>& scalar_table<float>();
template const KernelTable<double>& scalar_table<double>();

}  // namespace dribble::simd::detail
