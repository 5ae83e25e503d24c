#pragma once

#include <cstddef>

// Data-parallel inner loops, provided as scalar reference kernels plus AVX2
// variants selected at runtime. Two equivalence classes:
//
//  - exact kernels (axpy, scale_max, relu*, adam_step): mul/add/cmp only, no
//    reassociation, so scalar and AVX2 agree bitwise;
//  - reduction kernels (gemm_*, dot): AVX2 uses FMA and a different
//    accumulation order, so they agree to rounding, not bitwise.
//
// Within one process the selected backend is fixed, which keeps whole-run
// determinism (same binary + same machine -> same bytes).

namespace sdwan::kernels {

enum class Backend { kAuto, kScalar, kAvx2 };

struct Ops {
  // C(m x n) = A(m x k) * B(n x k)^T, all row-major; accumulate adds into C
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  std::size_t lda, const double* b, std::size_t ldb, double* c,
                  std::size_t ldc, bool accumulate);
  // C(m x n) = A(m x k) * B(k x n)
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  std::size_t lda, const double* b, std::size_t ldb, double* c,
                  std::size_t ldc, bool accumulate);
  // C(m x n) = A(k x m)^T * B(k x n)
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  std::size_t lda, const double* b, std::size_t ldb, double* c,
                  std::size_t ldc, bool accumulate);
  void (*relu)(std::size_t n, double* x);
  // dx[i] = pre[i] > 0 ? dy[i] : 0 (in place on dy)
  void (*relu_mask)(std::size_t n, const double* pre, double* dy);
  // fused Adam update; lr_t is the bias-corrected step size for this step
  void (*adam_step)(std::size_t n, double* p, const double* g, double* m,
                    double* v, double lr_t, double beta1, double beta2,
                    double eps);
  // y[i] += a * x[i]
  void (*axpy)(std::size_t n, double a, const double* x, double* y);
  // acc[i] = max(acc[i], x[i] * s)
  void (*scale_max)(std::size_t n, const double* x, double s, double* acc);
  double (*dot)(std::size_t n, const double* a, const double* b);
};

// Kernel table for the requested backend (kAuto resolves via cpuid).
const Ops& ops_for(Backend b);

// Active process-wide table. Defaults to kAuto on first use.
const Ops& ops();
void set_backend(Backend b);
Backend active_backend();
bool avx2_available();
const char* backend_name(Backend b);

namespace detail {
extern const Ops scalar_ops;
#if defined(__x86_64__) || defined(_M_X64)
extern const Ops avx2_ops;
#endif
}  // namespace detail

}  // namespace sdwan::kernels
