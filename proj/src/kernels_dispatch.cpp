#include "sdwan/kernels.hpp"

#include <atomic>

namespace sdwan::kernels {

namespace {

bool detect_avx2() {
#if (defined(__x86_64__) || defined(_M_X64)) && defined(__GNUC__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

std::atomic<Backend> g_backend{Backend::kAuto};

Backend resolve(Backend b) {
  if (b == Backend::kAuto) return avx2_available() ? Backend::kAvx2 : Backend::kScalar;
  return b;
}

}  // namespace

bool avx2_available() {
#if defined(__x86_64__) || defined(_M_X64)
  static const bool ok = detect_avx2();
  return ok;
#else
  return false;
#endif
}

const Ops& ops_for(Backend b) {
  switch (resolve(b)) {
#if defined(__x86_64__) || defined(_M_X64)
    case Backend::kAvx2:
      return detail::avx2_ops;
#endif
    default:
      return detail::scalar_ops;
  }
}

const Ops& ops() { return ops_for(g_backend.load(std::memory_order_relaxed)); }

void set_backend(Backend b) {
  if (b == Backend::kAvx2 && !avx2_available()) b = Backend::kScalar;
  g_backend.store(b, std::memory_order_relaxed);
}

Backend active_backend() {
  return resolve(g_backend.load(std::memory_order_relaxed));
}

const char* backend_name(Backend b) {
  switch (resolve(b)) {
    case Backend::kAvx2:
      return "avx2";
    default:
      return "scalar";
  }
}

}  // namespace sdwan::kernels
