// AVX2 variants. Compiled with -mavx2 -mfma -ffp-contract=off: FMA appears
// only where written explicitly (gemm/dot); the exact-class kernels keep
// separate mul/add so they match the scalar reference bitwise.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "sdwan/kernels.hpp"

namespace sdwan::kernels {
namespace {

// collapse four 4-lane partial sums into [dot0, dot1, dot2, dot3]
inline __m256d reduce4(__m256d s0, __m256d s1, __m256d s2, __m256d s3) {
  __m256d t01 = _mm256_hadd_pd(s0, s1);
  __m256d t23 = _mm256_hadd_pd(s2, s3);
  __m256d swap = _mm256_permute2f128_pd(t01, t23, 0x21);
  __m256d blend = _mm256_blend_pd(t01, t23, 0b1100);
  return _mm256_add_pd(swap, blend);
}

inline double dot_tail(std::size_t from, std::size_t k, const double* a,
                       const double* b) {
  double s = 0.0;
  for (std::size_t kk = from; kk < k; ++kk) s += a[kk] * b[kk];
  return s;
}

void gemm_nt_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  std::size_t lda, const double* b, std::size_t ldb, double* c,
                  std::size_t ldc, bool accumulate) {
  const std::size_t k4 = k & ~std::size_t(3);
  const std::size_t n4 = n & ~std::size_t(3);
  std::size_t i = 0;
  for (; i + 2 <= m; i += 2) {
    const double* a0 = a + i * lda;
    const double* a1 = a0 + lda;
    std::size_t j = 0;
    for (; j < n4; j += 4) {
      const double* b0 = b + j * ldb;
      const double* b1 = b0 + ldb;
      const double* b2 = b1 + ldb;
      const double* b3 = b2 + ldb;
      __m256d s00 = _mm256_setzero_pd(), s01 = _mm256_setzero_pd(),
              s02 = _mm256_setzero_pd(), s03 = _mm256_setzero_pd();
      __m256d s10 = _mm256_setzero_pd(), s11 = _mm256_setzero_pd(),
              s12 = _mm256_setzero_pd(), s13 = _mm256_setzero_pd();
      for (std::size_t kk = 0; kk < k4; kk += 4) {
        const __m256d va0 = _mm256_loadu_pd(a0 + kk);
        const __m256d va1 = _mm256_loadu_pd(a1 + kk);
        const __m256d vb0 = _mm256_loadu_pd(b0 + kk);
        const __m256d vb1 = _mm256_loadu_pd(b1 + kk);
        const __m256d vb2 = _mm256_loadu_pd(b2 + kk);
        const __m256d vb3 = _mm256_loadu_pd(b3 + kk);
        s00 = _mm256_fmadd_pd(va0, vb0, s00);
        s01 = _mm256_fmadd_pd(va0, vb1, s01);
        s02 = _mm256_fmadd_pd(va0, vb2, s02);
        s03 = _mm256_fmadd_pd(va0, vb3, s03);
        s10 = _mm256_fmadd_pd(va1, vb0, s10);
        s11 = _mm256_fmadd_pd(va1, vb1, s11);
        s12 = _mm256_fmadd_pd(va1, vb2, s12);
        s13 = _mm256_fmadd_pd(va1, vb3, s13);
      }
      double d0[4], d1[4];
      _mm256_storeu_pd(d0, reduce4(s00, s01, s02, s03));
      _mm256_storeu_pd(d1, reduce4(s10, s11, s12, s13));
      const double* bs[4] = {b0, b1, b2, b3};
      for (int q = 0; q < 4; ++q) {
        d0[q] += dot_tail(k4, k, a0, bs[q]);
        d1[q] += dot_tail(k4, k, a1, bs[q]);
      }
      double* c0 = c + i * ldc + j;
      double* c1 = c0 + ldc;
      for (int q = 0; q < 4; ++q) {
        c0[q] = accumulate ? c0[q] + d0[q] : d0[q];
        c1[q] = accumulate ? c1[q] + d1[q] : d1[q];
      }
    }
    for (; j < n; ++j) {
      const double* bj = b + j * ldb;
      const double d0 = dot_tail(0, k, a0, bj);
      const double d1 = dot_tail(0, k, a1, bj);
      double* c0 = c + i * ldc + j;
      double* c1 = c0 + ldc;
      *c0 = accumulate ? *c0 + d0 : d0;
      *c1 = accumulate ? *c1 + d1 : d1;
    }
  }
  for (; i < m; ++i) {
    const double* a0 = a + i * lda;
    std::size_t j = 0;
    for (; j < n4; j += 4) {
      const double* b0 = b + j * ldb;
      const double* b1 = b0 + ldb;
      const double* b2 = b1 + ldb;
      const double* b3 = b2 + ldb;
      __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd(),
              s2 = _mm256_setzero_pd(), s3 = _mm256_setzero_pd();
      for (std::size_t kk = 0; kk < k4; kk += 4) {
        const __m256d va = _mm256_loadu_pd(a0 + kk);
        s0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b0 + kk), s0);
        s1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b1 + kk), s1);
        s2 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b2 + kk), s2);
        s3 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b3 + kk), s3);
      }
      double d[4];
      _mm256_storeu_pd(d, reduce4(s0, s1, s2, s3));
      const double* bs[4] = {b0, b1, b2, b3};
      for (int q = 0; q < 4; ++q) d[q] += dot_tail(k4, k, a0, bs[q]);
      double* cj = c + i * ldc + j;
      for (int q = 0; q < 4; ++q) cj[q] = accumulate ? cj[q] + d[q] : d[q];
    }
    for (; j < n; ++j) {
      const double d = dot_tail(0, k, a0, b + j * ldb);
      double* cj = c + i * ldc + j;
      *cj = accumulate ? *cj + d : d;
    }
  }
}

// shared inner body for nn/tn: axpy-style rank-1 accumulation with a 2-row,
// 16-column register block; the two differ only in how A is indexed
template <bool kTransA>
void gemm_axpy_style(std::size_t m, std::size_t n, std::size_t k,
                     const double* a, std::size_t lda, const double* b,
                     std::size_t ldb, double* c, std::size_t ldc,
                     bool accumulate) {
  if (!accumulate) {
    for (std::size_t i = 0; i < m; ++i)
      std::fill(c + i * ldc, c + i * ldc + n, 0.0);
  }
  const auto a_at = [&](std::size_t row, std::size_t kk) {
    return kTransA ? a[kk * lda + row] : a[row * lda + kk];
  };
  const std::size_t n16 = n & ~std::size_t(15);
  std::size_t i = 0;
  for (; i + 2 <= m; i += 2) {
    double* c0 = c + i * ldc;
    double* c1 = c0 + ldc;
    std::size_t j = 0;
    for (; j < n16; j += 16) {
      __m256d r00 = _mm256_loadu_pd(c0 + j);
      __m256d r01 = _mm256_loadu_pd(c0 + j + 4);
      __m256d r02 = _mm256_loadu_pd(c0 + j + 8);
      __m256d r03 = _mm256_loadu_pd(c0 + j + 12);
      __m256d r10 = _mm256_loadu_pd(c1 + j);
      __m256d r11 = _mm256_loadu_pd(c1 + j + 4);
      __m256d r12 = _mm256_loadu_pd(c1 + j + 8);
      __m256d r13 = _mm256_loadu_pd(c1 + j + 12);
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double* bk = b + kk * ldb + j;
        const __m256d va0 = _mm256_set1_pd(a_at(i, kk));
        const __m256d va1 = _mm256_set1_pd(a_at(i + 1, kk));
        const __m256d vb0 = _mm256_loadu_pd(bk);
        const __m256d vb1 = _mm256_loadu_pd(bk + 4);
        const __m256d vb2 = _mm256_loadu_pd(bk + 8);
        const __m256d vb3 = _mm256_loadu_pd(bk + 12);
        r00 = _mm256_fmadd_pd(va0, vb0, r00);
        r01 = _mm256_fmadd_pd(va0, vb1, r01);
        r02 = _mm256_fmadd_pd(va0, vb2, r02);
        r03 = _mm256_fmadd_pd(va0, vb3, r03);
        r10 = _mm256_fmadd_pd(va1, vb0, r10);
        r11 = _mm256_fmadd_pd(va1, vb1, r11);
        r12 = _mm256_fmadd_pd(va1, vb2, r12);
        r13 = _mm256_fmadd_pd(va1, vb3, r13);
      }
      _mm256_storeu_pd(c0 + j, r00);
      _mm256_storeu_pd(c0 + j + 4, r01);
      _mm256_storeu_pd(c0 + j + 8, r02);
      _mm256_storeu_pd(c0 + j + 12, r03);
      _mm256_storeu_pd(c1 + j, r10);
      _mm256_storeu_pd(c1 + j + 4, r11);
      _mm256_storeu_pd(c1 + j + 8, r12);
      _mm256_storeu_pd(c1 + j + 12, r13);
    }
    for (; j < n; ++j) {
      double s0 = c0[j], s1 = c1[j];
      for (std::size_t kk = 0; kk < k; ++kk) {
        s0 += a_at(i, kk) * b[kk * ldb + j];
        s1 += a_at(i + 1, kk) * b[kk * ldb + j];
      }
      c0[j] = s0;
      c1[j] = s1;
    }
  }
  for (; i < m; ++i) {
    double* c0 = c + i * ldc;
    std::size_t j = 0;
    for (; j < n16; j += 16) {
      __m256d r0 = _mm256_loadu_pd(c0 + j);
      __m256d r1 = _mm256_loadu_pd(c0 + j + 4);
      __m256d r2 = _mm256_loadu_pd(c0 + j + 8);
      __m256d r3 = _mm256_loadu_pd(c0 + j + 12);
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double* bk = b + kk * ldb + j;
        const __m256d va = _mm256_set1_pd(a_at(i, kk));
        r0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(bk), r0);
        r1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(bk + 4), r1);
        r2 = _mm256_fmadd_pd(va, _mm256_loadu_pd(bk + 8), r2);
        r3 = _mm256_fmadd_pd(va, _mm256_loadu_pd(bk + 12), r3);
      }
      _mm256_storeu_pd(c0 + j, r0);
      _mm256_storeu_pd(c0 + j + 4, r1);
      _mm256_storeu_pd(c0 + j + 8, r2);
      _mm256_storeu_pd(c0 + j + 12, r3);
    }
    for (; j < n; ++j) {
      double s = c0[j];
      for (std::size_t kk = 0; kk < k; ++kk) s += a_at(i, kk) * b[kk * ldb + j];
      c0[j] = s;
    }
  }
}

void gemm_nn_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  std::size_t lda, const double* b, std::size_t ldb, double* c,
                  std::size_t ldc, bool accumulate) {
  gemm_axpy_style<false>(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

void gemm_tn_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  std::size_t lda, const double* b, std::size_t ldb, double* c,
                  std::size_t ldc, bool accumulate) {
  gemm_axpy_style<true>(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

void relu_avx2(std::size_t n, double* x) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(x + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  for (; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_mask_avx2(std::size_t n, const double* pre, double* dy) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(pre + i), zero, _CMP_GT_OQ);
    _mm256_storeu_pd(dy + i, _mm256_and_pd(_mm256_loadu_pd(dy + i), mask));
  }
  for (; i < n; ++i) {
    if (!(pre[i] > 0.0)) dy[i] = 0.0;
  }
}

void adam_step_avx2(std::size_t n, double* p, const double* g, double* m,
                    double* v, double lr_t, double beta1, double beta2,
                    double eps) {
  const __m256d vb1 = _mm256_set1_pd(beta1);
  const __m256d vb2 = _mm256_set1_pd(beta2);
  const __m256d vo1 = _mm256_set1_pd(1.0 - beta1);
  const __m256d vo2 = _mm256_set1_pd(1.0 - beta2);
  const __m256d vlr = _mm256_set1_pd(lr_t);
  const __m256d veps = _mm256_set1_pd(eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vg = _mm256_loadu_pd(g + i);
    __m256d vm = _mm256_loadu_pd(m + i);
    __m256d vv = _mm256_loadu_pd(v + i);
    vm = _mm256_add_pd(_mm256_mul_pd(vb1, vm), _mm256_mul_pd(vo1, vg));
    vv = _mm256_add_pd(_mm256_mul_pd(vb2, vv),
                       _mm256_mul_pd(vo2, _mm256_mul_pd(vg, vg)));
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vv), veps);
    const __m256d step = _mm256_mul_pd(vlr, _mm256_div_pd(vm, denom));
    _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
    _mm256_storeu_pd(m + i, vm);
    _mm256_storeu_pd(v + i, vv);
  }
  for (; i < n; ++i) {
    const double gi = g[i];
    m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
    v[i] = beta2 * v[i] + (1.0 - beta2) * (gi * gi);
    p[i] -= lr_t * (m[i] / (std::sqrt(v[i]) + eps));
  }
}

void axpy_avx2(std::size_t n, double a, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void scale_max_avx2(std::size_t n, const double* x, double s, double* acc) {
  const __m256d vs = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d u = _mm256_mul_pd(_mm256_loadu_pd(x + i), vs);
    _mm256_storeu_pd(acc + i, _mm256_max_pd(_mm256_loadu_pd(acc + i), u));
  }
  for (; i < n; ++i) {
    const double u = x[i] * s;
    if (u > acc[i]) acc[i] = u;
  }
}

double dot_avx2(std::size_t n, const double* a, const double* b) {
  __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
  __m256d s2 = _mm256_setzero_pd(), s3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
    s1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), s1);
    s2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), s2);
    s3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), s3);
  }
  for (; i + 4 <= n; i += 4)
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
  double lanes[4];
  _mm256_storeu_pd(lanes,
                   _mm256_add_pd(_mm256_add_pd(s0, s1), _mm256_add_pd(s2, s3)));
  double s = lanes[0] + lanes[1] + lanes[2] + lanes[3];
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

namespace detail {
const Ops avx2_ops = {
    gemm_nt_avx2, gemm_nn_avx2,   gemm_tn_avx2,
    relu_avx2,    relu_mask_avx2, adam_step_avx2,
    axpy_avx2,    scale_max_avx2, dot_avx2,
};
}  // namespace detail

}  // namespace sdwan::kernels

#endif  // x86_64
