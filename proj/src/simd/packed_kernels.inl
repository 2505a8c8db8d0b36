// Packed GEMM and elementwise kernels written against an ISA traits class `Tr`.
// Included inside an anonymous namespace by each ISA translation unit, which
// supplies Tr and compiles with the matching target flags.
//
// Tr provides: T, V, L (lanes), MR (micro-tile rows), NV (vectors per micro-tile row),
// loadu, storeu, set1, zero, add, sub, mul, div, fma, sqrt, round_nearest, pow2n,
// select_positive(x, a, b) -> x > 0 ? a : b.

template <typename Tr>
struct Packed {
  using T = typename Tr::T;
  using V = typename Tr::V;
  static constexpr std::size_t L = Tr::L;
  static constexpr std::size_t MR = Tr::MR;
  static constexpr std::size_t NV = Tr::NV;
  static constexpr std::size_t NR = NV * L;
  static constexpr std::size_t KC = 256;
  static constexpr std::size_t MC = MR * 16;
  static constexpr std::size_t NC = NR * 64;

  static void pack_a(bool trans, const T* a, std::size_t lda, std::size_t i0, std::size_t p0, std::size_t mc,
                     std::size_t kc, T* dst) {
    for (std::size_t ir = 0; ir < mc; ir += MR) {
      const std::size_t rows = std::min(MR, mc - ir);
      for (std::size_t p = 0; p < kc; ++p) {
        for (std::size_t r = 0; r < MR; ++r) {
          T value = T(0);
          if (r < rows) {
            const std::size_t i = i0 + ir + r;
            value = trans ? a[(p0 + p) * lda + i] : a[i * lda + p0 + p];
          }
          *dst++ = value;
        }
      }
    }
  }

  static void pack_b(bool trans, const T* b, std::size_t ldb, std::size_t p0, std::size_t j0, std::size_t kc,
                     std::size_t nc, T* dst) {
    for (std::size_t jr = 0; jr < nc; jr += NR) {
      const std::size_t cols = std::min(NR, nc - jr);
      for (std::size_t p = 0; p < kc; ++p) {
        if (!trans && cols == NR) {
          const T* src = b + (p0 + p) * ldb + j0 + jr;
          for (std::size_t c = 0; c < NR; ++c) dst[c] = src[c];
        } else {
          for (std::size_t c = 0; c < NR; ++c) {
            T value = T(0);
            if (c < cols) {
              const std::size_t j = j0 + jr + c;
              value = trans ? b[j * ldb + p0 + p] : b[(p0 + p) * ldb + j];
            }
            dst[c] = value;
          }
        }
        dst += NR;
      }
    }
  }

  static void micro_kernel(std::size_t kc, const T* a, const T* b, T* c, std::size_t ldc, std::size_t rows,
                           std::size_t cols, bool overwrite) {
    V acc[MR][NV];
#pragma GCC unroll 16
    for (std::size_t r = 0; r < MR; ++r) {
#pragma GCC unroll 4
      for (std::size_t v = 0; v < NV; ++v) acc[r][v] = Tr::zero();
    }
    for (std::size_t p = 0; p < kc; ++p) {
      V bv[NV];
#pragma GCC unroll 4
      for (std::size_t v = 0; v < NV; ++v) bv[v] = Tr::loadu(b + v * L);
#pragma GCC unroll 16
      for (std::size_t r = 0; r < MR; ++r) {
        const V av = Tr::set1(a[r]);
#pragma GCC unroll 4
        for (std::size_t v = 0; v < NV; ++v) acc[r][v] = Tr::fma(av, bv[v], acc[r][v]);
      }
      a += MR;
      b += NR;
    }
    if (rows == MR && cols == NR) {
#pragma GCC unroll 16
      for (std::size_t r = 0; r < MR; ++r) {
#pragma GCC unroll 4
        for (std::size_t v = 0; v < NV; ++v) {
          T* dst = c + r * ldc + v * L;
          Tr::storeu(dst, overwrite ? acc[r][v] : Tr::add(Tr::loadu(dst), acc[r][v]));
        }
      }
      return;
    }
    alignas(64) T tile[MR * NR];
    for (std::size_t r = 0; r < MR; ++r) {
      for (std::size_t v = 0; v < NV; ++v) Tr::storeu(tile + r * NR + v * L, acc[r][v]);
    }
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < cols; ++j) {
        T& dst = c[r * ldc + j];
        dst = overwrite ? tile[r * NR + j] : dst + tile[r * NR + j];
      }
    }
  }

  static void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
                   std::size_t lda, const T* b, std::size_t ldb, bool accumulate, T* c, std::size_t ldc) {
    if (m == 0 || n == 0) return;
    if (k == 0) {
      if (!accumulate) {
        for (std::size_t i = 0; i < m; ++i) std::fill(c + i * ldc, c + i * ldc + n, T(0));
      }
      return;
    }
    static thread_local std::vector<T> packed_b;
    for (std::size_t jc = 0; jc < n; jc += NC) {
      const std::size_t nc = std::min(NC, n - jc);
      const std::size_t nc_padded = (nc + NR - 1) / NR * NR;
      for (std::size_t pc = 0; pc < k; pc += KC) {
        const std::size_t kc = std::min(KC, k - pc);
        packed_b.resize(kc * nc_padded);
        pack_b(trans_b, b, ldb, pc, jc, kc, nc, packed_b.data());
        const bool overwrite = pc == 0 && !accumulate;
        const T* pb = packed_b.data();
        const std::size_t blocks = (m + MC - 1) / MC;
        parallel_for(blocks, [&](std::size_t blk) {
          static thread_local std::vector<T> packed_a;
          const std::size_t ic = blk * MC;
          const std::size_t mc = std::min(MC, m - ic);
          const std::size_t mc_padded = (mc + MR - 1) / MR * MR;
          packed_a.resize(mc_padded * kc);
          pack_a(trans_a, a, lda, ic, pc, mc, kc, packed_a.data());
          for (std::size_t jr = 0; jr < nc; jr += NR) {
            const std::size_t cols = std::min(NR, nc - jr);
            for (std::size_t ir = 0; ir < mc; ir += MR) {
              const std::size_t rows = std::min(MR, mc - ir);
              micro_kernel(kc, packed_a.data() + ir * kc, pb + jr * kc, c + (ic + ir) * ldc + jc + jr, ldc, rows, cols,
                           overwrite);
            }
          }
        });
      }
    }
  }

  static void add_bias(std::size_t m, std::size_t n, const T* bias, T* c, std::size_t ldc) {
    for (std::size_t i = 0; i < m; ++i) {
      T* row = c + i * ldc;
      std::size_t j = 0;
      for (; j + L <= n; j += L) Tr::storeu(row + j, Tr::add(Tr::loadu(row + j), Tr::loadu(bias + j)));
      for (; j < n; ++j) row[j] += bias[j];
    }
  }

  static void column_sum(std::size_t m, std::size_t n, const T* x, std::size_t ldx, T* out) {
    for (std::size_t i = 0; i < m; ++i) {
      const T* row = x + i * ldx;
      std::size_t j = 0;
      for (; j + L <= n; j += L) Tr::storeu(out + j, Tr::add(Tr::loadu(out + j), Tr::loadu(row + j)));
      for (; j < n; ++j) out[j] += row[j];
    }
  }

  // exp(x) for x <= 0, via x = n ln2 + r with |r| <= ln2/2 and a Taylor polynomial in r.
  static V exp_nonpositive(V x) {
    x = Tr::max(x, Tr::set1(Tr::kExpMin));
    x = Tr::min(x, Tr::zero());
    const V n = Tr::round_nearest(Tr::mul(x, Tr::set1(T(1.44269504088896340736))));
    V r = Tr::fma(n, Tr::set1(-Tr::kLn2Hi), x);
    r = Tr::fma(n, Tr::set1(-Tr::kLn2Lo), r);
    V p = Tr::set1(Tr::kInvFactorial[Tr::kExpDegree]);
    for (int d = Tr::kExpDegree - 1; d >= 0; --d) p = Tr::fma(p, r, Tr::set1(Tr::kInvFactorial[d]));
    return Tr::pow2n(p, n);
  }

  static void elu_forward(std::size_t n, const T* x, T* y) {
    std::size_t i = 0;
    const V one = Tr::set1(T(1));
    for (; i + L <= n; i += L) {
      const V xv = Tr::loadu(x + i);
      const V neg = Tr::sub(exp_nonpositive(xv), one);
      Tr::storeu(y + i, Tr::select_positive(xv, xv, neg));
    }
    for (; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : std::expm1(x[i]);
  }

  static void elu_backward(std::size_t n, const T* y, const T* dy, T* dx) {
    std::size_t i = 0;
    const V one = Tr::set1(T(1));
    for (; i + L <= n; i += L) {
      const V yv = Tr::loadu(y + i);
      const V g = Tr::loadu(dy + i);
      Tr::storeu(dx + i, Tr::select_positive(yv, g, Tr::mul(g, Tr::add(yv, one))));
    }
    for (; i < n; ++i) dx[i] = y[i] > T(0) ? dy[i] : dy[i] * (y[i] + T(1));
  }

  static void adam_update(std::size_t n, T* param, const T* grad, T* m, T* v, T beta1, T beta2, T step_size,
                          T eps_hat) {
    const V b1 = Tr::set1(beta1), b2 = Tr::set1(beta2);
    const V c1 = Tr::set1(T(1) - beta1), c2 = Tr::set1(T(1) - beta2);
    const V lr = Tr::set1(step_size), eps = Tr::set1(eps_hat);
    std::size_t i = 0;
    for (; i + L <= n; i += L) {
      const V g = Tr::loadu(grad + i);
      const V mv = Tr::add(Tr::mul(b1, Tr::loadu(m + i)), Tr::mul(c1, g));
      const V vv = Tr::add(Tr::mul(b2, Tr::loadu(v + i)), Tr::mul(Tr::mul(c2, g), g));
      Tr::storeu(m + i, mv);
      Tr::storeu(v + i, vv);
      const V step = Tr::div(Tr::mul(lr, mv), Tr::add(Tr::sqrt(vv), eps));
      Tr::storeu(param + i, Tr::sub(Tr::loadu(param + i), step));
    }
    for (; i < n; ++i) {
      m[i] = beta1 * m[i] + (T(1) - beta1) * grad[i];
      v[i] = beta2 * v[i] + (T(1) - beta2) * grad[i] * grad[i];
      param[i] -= step_size * m[i] / (std::sqrt(v[i]) + eps_hat);
    }
  }

  static T sum_squares(std::size_t n, const T* x) {
    V acc = Tr::zero();
    std::size_t i = 0;
    for (; i + L <= n; i += L) {
      const V xv = Tr::loadu(x + i);
      acc = Tr::fma(xv, xv, acc);
    }
    alignas(64) T lanes[L];
    Tr::storeu(lanes, acc);
    T s = 0;
    for (std::size_t l = 0; l < L; ++l) s += lanes[l];
    for (; i < n; ++i) s += x[i] * x[i];
    return s;
  }

  static const KernelTable<T>& table() {
    static const KernelTable<T> t{&gemm, &add_bias, &column_sum, &elu_forward, &elu_backward, &adam_update, &sum_squares};
    return t;
  }
};

template <typename T>
struct ExpConstants;

template <>
struct ExpConstants<float> {
  static constexpr float kExpMin = -80.0f;
  static constexpr float kLn2Hi = 0.693359375f;
  static constexpr float kLn2Lo = -2.12194440e-4f;
  static constexpr int kExpDegree = 7;
  static constexpr float kInvFactorial[8] = {1.0f,         1.0f,          0.5f,           1.0f / 6.0f,
                                             1.0f / 24.0f, 1.0f / 120.0f, 1.0f / 720.0f,  1.0f / 5040.0f};
};

template <>
struct ExpConstants<double> {
  static constexpr double kExpMin = -700.0;
  static constexpr double kLn2Hi = 6.93147180369123816490e-01;
  static constexpr double kLn2Lo = 1.90821492927058770002e-10;
  static constexpr int kExpDegree = 12;
  static constexpr double kInvFactorial[13] = {1.0,
                                               1.0,
                                               1.0 / 2.0,
                                               1.0 / 6.0,
                                               1.0 / 24.0,
                                               1.0 / 120.0,
                                               1.0 / 720.0,
                                               1.0 / 5040.0,
                                               1.0 / 40320.0,
                                               1.0 / 362880.0,
                                               1.0 / 3628800.0,
                                               1.0 / 39916800.0,
                                               1.0 / 479001600.0};
};
