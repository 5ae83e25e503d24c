#include "sdwan/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace sdwan::kernels {
namespace {

void gemm_nt_scalar(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, std::size_t lda, const double* b,
                    std::size_t ldb, double* c, std::size_t ldc,
                    bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * lda;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * ldb;
      double s = 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) s += ai[kk] * bj[kk];
      double* cij = c + i * ldc + j;
      *cij = accumulate ? *cij + s : s;
    }
  }
}

void gemm_nn_scalar(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, std::size_t lda, const double* b,
                    std::size_t ldb, double* c, std::size_t ldc,
                    bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * ldc;
    if (!accumulate) std::fill(ci, ci + n, 0.0);
    const double* ai = a + i * lda;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aik = ai[kk];
      const double* bk = b + kk * ldb;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
    }
  }
}

void gemm_tn_scalar(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, std::size_t lda, const double* b,
                    std::size_t ldb, double* c, std::size_t ldc,
                    bool accumulate) {
  if (!accumulate) {
    for (std::size_t i = 0; i < m; ++i)
      std::fill(c + i * ldc, c + i * ldc + n, 0.0);
  }
  for (std::size_t kk = 0; kk < k; ++kk) {
    const double* ak = a + kk * lda;
    const double* bk = b + kk * ldb;
    for (std::size_t i = 0; i < m; ++i) {
      const double aki = ak[i];
      double* ci = c + i * ldc;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aki * bk[j];
    }
  }
}

void relu_scalar(std::size_t n, double* x) {
  for (std::size_t i = 0; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_mask_scalar(std::size_t n, const double* pre, double* dy) {
  for (std::size_t i = 0; i < n; ++i) {
    if (!(pre[i] > 0.0)) dy[i] = 0.0;
  }
}

void adam_step_scalar(std::size_t n, double* p, const double* g, double* m,
                      double* v, double lr_t, double beta1, double beta2,
                      double eps) {
  const double om1 = 1.0 - beta1;
  const double om2 = 1.0 - beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const double gi = g[i];
    m[i] = beta1 * m[i] + om1 * gi;
    v[i] = beta2 * v[i] + om2 * (gi * gi);
    p[i] -= lr_t * (m[i] / (std::sqrt(v[i]) + eps));
  }
}

void axpy_scalar(std::size_t n, double a, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_max_scalar(std::size_t n, const double* x, double s, double* acc) {
  for (std::size_t i = 0; i < n; ++i) {
    const double u = x[i] * s;
    if (u > acc[i]) acc[i] = u;
  }
}

double dot_scalar(std::size_t n, const double* a, const double* b) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

namespace detail {
const Ops scalar_ops = {
    gemm_nt_scalar, gemm_nn_scalar,  gemm_tn_scalar,
    relu_scalar,    relu_mask_scalar, adam_step_scalar,
    axpy_scalar,    scale_max_scalar, dot_scalar,
};
}  // namespace detail

}  // namespace sdwan::kernels
