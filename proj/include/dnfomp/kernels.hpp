#pragma once

#include <cstddef>
#include <string_view>

// Data-parallel inner loops behind the autodiff tape and the Adam updates.
// Every kernel exists as a scalar reference implementation, plus an AVX2
// variant on x86-64 selected at runtime. Both variants of a kernel satisfy
// the same contract; the test suite checks them against each other.
//
// GEMM conventions: all matrices are row-major, C is m x n, k is the
// contraction length. The transpose suffixes say how A and B are stored:
//   gemm_nn : C (+)= A * B      A is m x k, B is k x n
//   gemm_tn : C (+)= A^T * B    A is k x m, B is k x n
//   gemm_nt : C (+)= A * B^T    A is m x k, B is n x k
// With accumulate=false the kernel overwrites C.

namespace dnfomp::kernels {

using GemmFn = void (*)(double* c, const double* a, const double* b,
                        std::size_t m, std::size_t k, std::size_t n,
                        bool accumulate);
using ReluFwdFn = void (*)(double* y, const double* x, std::size_t n);
// dx += dy elementwise where x > 0
using ReluBwdFn = void (*)(double* dx, const double* dy, const double* x,
                           std::size_t n);
// Y (rows x cols) += b broadcast along columns; b has `rows` entries.
using BiasAddFn = void (*)(double* y, const double* b, std::size_t rows,
                           std::size_t cols);
// db (rows) += per-row sums of dY (rows x cols).
using BiasRowSumFn = void (*)(double* db, const double* dy, std::size_t rows,
                              std::size_t cols);
// One bias-corrected Adam update; m/v are the running first/second moments,
// beta1_pow/beta2_pow are beta^step for the correction.
using AdamStepFn = void (*)(double* param, const double* grad, double* m,
                            double* v, std::size_t n, double lr, double beta1,
                            double beta2, double beta1_pow, double beta2_pow,
                            double eps);

struct Ops {
  GemmFn gemm_nn;
  GemmFn gemm_tn;
  GemmFn gemm_nt;
  ReluFwdFn relu_fwd;
  ReluBwdFn relu_bwd;
  BiasAddFn bias_add;
  BiasRowSumFn bias_row_sum;
  AdamStepFn adam_step;
};

enum class Backend { kScalar, kAvx2 };

bool backend_supported(Backend b);
std::string_view backend_name(Backend b);

/// Backend chosen at startup: AVX2 when compiled in and the CPU has
/// avx2+fma, unless the DNFOMP_KERNELS env var ("scalar"/"avx2") overrides.
Backend active_backend();

/// Force a backend (tests). Throws InvalidInputError if unsupported.
void set_backend(Backend b);

/// Kernel table of the active backend.
const Ops& ops();

/// Kernel table of an explicit backend (equivalence tests).
const Ops& ops_for(Backend b);

namespace detail {
extern const Ops kScalarOps;
#if DNFOMP_HAVE_AVX2
extern const Ops kAvx2Ops;
bool cpu_has_avx2_fma();
#endif
}  // namespace detail

}  // namespace dnfomp::kernels
