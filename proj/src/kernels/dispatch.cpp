#include <atomic>
#include <cstdlib>
#include <cstring>

#include "dnfomp/common.hpp"
#include "dnfomp/kernels.hpp"

namespace dnfomp::kernels {
namespace {

Backend detect_default() {
#if DNFOMP_HAVE_AVX2
  if (const char* env = std::getenv("DNFOMP_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::kScalar;
    if (std::strcmp(env, "avx2") == 0 && detail::cpu_has_avx2_fma())
      return Backend::kAvx2;
    // anything else, including "auto", falls through to detection
    if (std::strcmp(env, "avx2") == 0) return Backend::kScalar;
  }
  if (detail::cpu_has_avx2_fma()) return Backend::kAvx2;
#else
  if (const char* env = std::getenv("DNFOMP_KERNELS")) {
    (void)env;  // only the scalar backend exists in this build
  }
#endif
  return Backend::kScalar;
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> backend{detect_default()};
  return backend;
}

}  // namespace

bool backend_supported(Backend b) {
  switch (b) {
    case Backend::kScalar:
      return true;
    case Backend::kAvx2:
#if DNFOMP_HAVE_AVX2
      return detail::cpu_has_avx2_fma();
#else
      return false;
#endif
  }
  return false;
}

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::kScalar:
      return "scalar";
    case Backend::kAvx2:
      return "avx2";
  }
  return "?";
}

Backend active_backend() { return current().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  if (!backend_supported(b)) {
    throw InvalidInputError("kernel backend not supported on this machine: " +
                            std::string(backend_name(b)));
  }
  current().store(b, std::memory_order_relaxed);
}

const Ops& ops_for(Backend b) {
#if DNFOMP_HAVE_AVX2
  if (b == Backend::kAvx2) return detail::kAvx2Ops;
#endif
  (void)b;
  return detail::kScalarOps;
}

const Ops& ops() { return ops_for(active_backend()); }

}  // namespace dnfomp::kernels
