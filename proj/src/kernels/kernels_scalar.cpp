#include <cmath>
#include <cstring>

#include "dnfomp/kernels.hpp"

// Reference kernels. Plain loops, no architecture assumptions; these define
// the semantics the SIMD variants are tested against.

namespace dnfomp::kernels {
namespace {

void gemm_nn_scalar(double* c, const double* a, const double* b,
                    std::size_t m, std::size_t k, std::size_t n,
                    bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    if (!accumulate) std::memset(crow, 0, n * sizeof(double));
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_tn_scalar(double* c, const double* a, const double* b,
                    std::size_t m, std::size_t k, std::size_t n,
                    bool accumulate) {
  if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt_scalar(double* c, const double* a, const double* b,
                    std::size_t m, std::size_t k, std::size_t n,
                    bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] = accumulate ? crow[j] + acc : acc;
    }
  }
}

void relu_fwd_scalar(double* y, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_bwd_scalar(double* dx, const double* dy, const double* x,
                     std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] > 0.0) dx[i] += dy[i];
  }
}

void bias_add_scalar(double* y, const double* b, std::size_t rows,
                     std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* yrow = y + r * cols;
    const double bv = b[r];
    for (std::size_t c = 0; c < cols; ++c) yrow[c] += bv;
  }
}

void bias_row_sum_scalar(double* db, const double* dy, std::size_t rows,
                         std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = dy + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c];
    db[r] += acc;
  }
}

void adam_step_scalar(double* param, const double* grad, double* m, double* v,
                      std::size_t n, double lr, double beta1, double beta2,
                      double beta1_pow, double beta2_pow, double eps) {
  const double c1 = 1.0 / (1.0 - beta1_pow);
  const double c2 = 1.0 / (1.0 - beta2_pow);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i];
    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
    v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
    const double mhat = m[i] * c1;
    const double vhat = v[i] * c2;
    param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace

namespace detail {
const Ops kScalarOps = {
    gemm_nn_scalar, gemm_tn_scalar, gemm_nt_scalar, relu_fwd_scalar,
    relu_bwd_scalar, bias_add_scalar, bias_row_sum_scalar, adam_step_scalar,
};
}  // namespace detail

}  // namespace dnfomp::kernels
