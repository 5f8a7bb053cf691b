#include <immintrin.h>

#include <cmath>
#include <cstring>

#include "dnfomp/kernels.hpp"

// AVX2+FMA variants of the hot kernels. Accumulation order differs from the
// scalar reference, so results agree to rounding, not bitwise; the
// equivalence tests use a tolerance accordingly.

namespace dnfomp::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

// C row tile: 2 rows x 8 columns kept in registers across the k loop.
void gemm_nn_avx2(double* c, const double* a, const double* b, std::size_t m,
                  std::size_t k, std::size_t n, bool accumulate) {
  if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
  std::size_t i = 0;
  for (; i + 2 <= m; i += 2) {
    const double* a0 = a + i * k;
    const double* a1 = a0 + k;
    double* c0 = c + i * n;
    double* c1 = c0 + n;
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
      __m256d acc00 = _mm256_loadu_pd(c0 + j);
      __m256d acc01 = _mm256_loadu_pd(c0 + j + 4);
      __m256d acc10 = _mm256_loadu_pd(c1 + j);
      __m256d acc11 = _mm256_loadu_pd(c1 + j + 4);
      for (std::size_t p = 0; p < k; ++p) {
        const double* brow = b + p * n + j;
        const __m256d b0 = _mm256_loadu_pd(brow);
        const __m256d b1 = _mm256_loadu_pd(brow + 4);
        const __m256d av0 = _mm256_set1_pd(a0[p]);
        const __m256d av1 = _mm256_set1_pd(a1[p]);
        acc00 = _mm256_fmadd_pd(av0, b0, acc00);
        acc01 = _mm256_fmadd_pd(av0, b1, acc01);
        acc10 = _mm256_fmadd_pd(av1, b0, acc10);
        acc11 = _mm256_fmadd_pd(av1, b1, acc11);
      }
      _mm256_storeu_pd(c0 + j, acc00);
      _mm256_storeu_pd(c0 + j + 4, acc01);
      _mm256_storeu_pd(c1 + j, acc10);
      _mm256_storeu_pd(c1 + j + 4, acc11);
    }
    for (; j < n; ++j) {
      double s0 = 0.0, s1 = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        s0 += a0[p] * b[p * n + j];
        s1 += a1[p] * b[p * n + j];
      }
      c0[j] += s0;
      c1[j] += s1;
    }
  }
  for (; i < m; ++i) {
    const double* a0 = a + i * k;
    double* c0 = c + i * n;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      __m256d acc = _mm256_loadu_pd(c0 + j);
      for (std::size_t p = 0; p < k; ++p) {
        acc = _mm256_fmadd_pd(_mm256_set1_pd(a0[p]),
                              _mm256_loadu_pd(b + p * n + j), acc);
      }
      _mm256_storeu_pd(c0 + j, acc);
    }
    for (; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a0[p] * b[p * n + j];
      c0[j] += s;
    }
  }
}

// Same tiling as gemm_nn; A is indexed transposed (stored k x m).
void gemm_tn_avx2(double* c, const double* a, const double* b, std::size_t m,
                  std::size_t k, std::size_t n, bool accumulate) {
  if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
  std::size_t i = 0;
  for (; i + 2 <= m; i += 2) {
    double* c0 = c + i * n;
    double* c1 = c0 + n;
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
      __m256d acc00 = _mm256_loadu_pd(c0 + j);
      __m256d acc01 = _mm256_loadu_pd(c0 + j + 4);
      __m256d acc10 = _mm256_loadu_pd(c1 + j);
      __m256d acc11 = _mm256_loadu_pd(c1 + j + 4);
      for (std::size_t p = 0; p < k; ++p) {
        const double* brow = b + p * n + j;
        const __m256d b0 = _mm256_loadu_pd(brow);
        const __m256d b1 = _mm256_loadu_pd(brow + 4);
        const __m256d av0 = _mm256_set1_pd(a[p * m + i]);
        const __m256d av1 = _mm256_set1_pd(a[p * m + i + 1]);
        acc00 = _mm256_fmadd_pd(av0, b0, acc00);
        acc01 = _mm256_fmadd_pd(av0, b1, acc01);
        acc10 = _mm256_fmadd_pd(av1, b0, acc10);
        acc11 = _mm256_fmadd_pd(av1, b1, acc11);
      }
      _mm256_storeu_pd(c0 + j, acc00);
      _mm256_storeu_pd(c0 + j + 4, acc01);
      _mm256_storeu_pd(c1 + j, acc10);
      _mm256_storeu_pd(c1 + j + 4, acc11);
    }
    for (; j < n; ++j) {
      double s0 = 0.0, s1 = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        s0 += a[p * m + i] * b[p * n + j];
        s1 += a[p * m + i + 1] * b[p * n + j];
      }
      c0[j] += s0;
      c1[j] += s1;
    }
  }
  for (; i < m; ++i) {
    double* c0 = c + i * n;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      __m256d acc = _mm256_loadu_pd(c0 + j);
      for (std::size_t p = 0; p < k; ++p) {
        acc = _mm256_fmadd_pd(_mm256_set1_pd(a[p * m + i]),
                              _mm256_loadu_pd(b + p * n + j), acc);
      }
      _mm256_storeu_pd(c0 + j, acc);
    }
    for (; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[p * m + i] * b[p * n + j];
      c0[j] += s;
    }
  }
}

// Row-times-row dot products; k is the fast axis of both operands.
void gemm_nt_avx2(double* c, const double* a, const double* b, std::size_t m,
                  std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    std::size_t j = 0;
    for (; j + 2 <= n; j += 2) {
      const double* b0 = b + j * k;
      const double* b1 = b0 + k;
      __m256d acc0 = _mm256_setzero_pd();
      __m256d acc1 = _mm256_setzero_pd();
      std::size_t p = 0;
      for (; p + 4 <= k; p += 4) {
        const __m256d av = _mm256_loadu_pd(arow + p);
        acc0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b0 + p), acc0);
        acc1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b1 + p), acc1);
      }
      double s0 = hsum(acc0);
      double s1 = hsum(acc1);
      for (; p < k; ++p) {
        s0 += arow[p] * b0[p];
        s1 += arow[p] * b1[p];
      }
      crow[j] = accumulate ? crow[j] + s0 : s0;
      crow[j + 1] = accumulate ? crow[j + 1] + s1 : s1;
    }
    for (; j < n; ++j) {
      const double* brow = b + j * k;
      __m256d acc = _mm256_setzero_pd();
      std::size_t p = 0;
      for (; p + 4 <= k; p += 4) {
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(arow + p),
                              _mm256_loadu_pd(brow + p), acc);
      }
      double s = hsum(acc);
      for (; p < k; ++p) s += arow[p] * brow[p];
      crow[j] = accumulate ? crow[j] + s : s;
    }
  }
}

void relu_fwd_avx2(double* y, const double* x, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  }
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_bwd_avx2(double* dx, const double* dy, const double* x,
                   std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d xv = _mm256_loadu_pd(x + i);
    const __m256d mask = _mm256_cmp_pd(xv, zero, _CMP_GT_OQ);
    const __m256d gated = _mm256_and_pd(_mm256_loadu_pd(dy + i), mask);
    _mm256_storeu_pd(dx + i, _mm256_add_pd(_mm256_loadu_pd(dx + i), gated));
  }
  for (; i < n; ++i) {
    if (x[i] > 0.0) dx[i] += dy[i];
  }
}

void bias_add_avx2(double* y, const double* b, std::size_t rows,
                   std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* yrow = y + r * cols;
    const __m256d bv = _mm256_set1_pd(b[r]);
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
      _mm256_storeu_pd(yrow + c, _mm256_add_pd(_mm256_loadu_pd(yrow + c), bv));
    }
    for (; c < cols; ++c) yrow[c] += b[r];
  }
}

void bias_row_sum_avx2(double* db, const double* dy, std::size_t rows,
                       std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = dy + r * cols;
    __m256d acc = _mm256_setzero_pd();
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(row + c));
    double s = hsum(acc);
    for (; c < cols; ++c) s += row[c];
    db[r] += s;
  }
}

void adam_step_avx2(double* param, const double* grad, double* m, double* v,
                    std::size_t n, double lr, double beta1, double beta2,
                    double beta1_pow, double beta2_pow, double eps) {
  const __m256d b1 = _mm256_set1_pd(beta1);
  const __m256d b2 = _mm256_set1_pd(beta2);
  const __m256d ob1 = _mm256_set1_pd(1.0 - beta1);
  const __m256d ob2 = _mm256_set1_pd(1.0 - beta2);
  const __m256d c1 = _mm256_set1_pd(1.0 / (1.0 - beta1_pow));
  const __m256d c2 = _mm256_set1_pd(1.0 / (1.0 - beta2_pow));
  const __m256d lrv = _mm256_set1_pd(lr);
  const __m256d epsv = _mm256_set1_pd(eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d g = _mm256_loadu_pd(grad + i);
    __m256d mv = _mm256_loadu_pd(m + i);
    __m256d vv = _mm256_loadu_pd(v + i);
    mv = _mm256_fmadd_pd(b1, mv, _mm256_mul_pd(ob1, g));
    vv = _mm256_fmadd_pd(b2, vv, _mm256_mul_pd(ob2, _mm256_mul_pd(g, g)));
    _mm256_storeu_pd(m + i, mv);
    _mm256_storeu_pd(v + i, vv);
    const __m256d mhat = _mm256_mul_pd(mv, c1);
    const __m256d vhat = _mm256_mul_pd(vv, c2);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), epsv);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(lrv, mhat), denom);
    _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), step));
  }
  const double cc1 = 1.0 / (1.0 - beta1_pow);
  const double cc2 = 1.0 / (1.0 - beta2_pow);
  for (; i < n; ++i) {
    const double g = grad[i];
    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
    v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
    param[i] -= lr * (m[i] * cc1) / (std::sqrt(v[i] * cc2) + eps);
  }
}

}  // namespace

namespace detail {

const Ops kAvx2Ops = {
    gemm_nn_avx2, gemm_tn_avx2, gemm_nt_avx2, relu_fwd_avx2,
    relu_bwd_avx2, bias_add_avx2, bias_row_sum_avx2, adam_step_avx2,
};

bool cpu_has_avx2_fma() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

}  // namespace detail
}  // namespace dnfomp::kernels
