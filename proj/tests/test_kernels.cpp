#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "sdwan/kernels.hpp"
#include "sdwan/rng.hpp"

using namespace sdwan;
using kernels::Ops;

namespace {

std::vector<double> rand_vec(StreamRng& rng, std::size_t n, double lo = -2.0,
                             double hi = 2.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Plain triple loop, written independently of the library's scalar kernels.
void naive_gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a,
                   std::size_t lda, const double* b, std::size_t ldb, double* c,
                   std::size_t ldc, bool acc) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = acc ? c[i * ldc + j] : 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * lda + p] * b[j * ldb + p];
      c[i * ldc + j] = s;
    }
  }
}

void naive_gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a,
                   std::size_t lda, const double* b, std::size_t ldb, double* c,
                   std::size_t ldc, bool acc) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = acc ? c[i * ldc + j] : 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * lda + p] * b[p * ldb + j];
      c[i * ldc + j] = s;
    }
  }
}

void naive_gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a,
                   std::size_t lda, const double* b, std::size_t ldb, double* c,
                   std::size_t ldc, bool acc) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = acc ? c[i * ldc + j] : 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[p * lda + i] * b[p * ldb + j];
      c[i * ldc + j] = s;
    }
  }
}

const std::vector<std::size_t> kSizes = {1, 2, 3, 7, 8, 17, 64, 100, 257};

}  // namespace

TEST_CASE("gemm variants match a naive triple loop") {
  StreamRng rng(42);
  const Ops& k = kernels::ops_for(kernels::Backend::kScalar);
  for (std::size_t m : {1ul, 3ul, 8ul, 17ul}) {
    for (std::size_t n : {1ul, 5ul, 16ul, 33ul}) {
      for (std::size_t kk : {1ul, 4ul, 19ul, 64ul}) {
        const auto a = rand_vec(rng, m * kk);
        const auto bt = rand_vec(rng, n * kk);   // n x k for NT
        const auto bn = rand_vec(rng, kk * n);   // k x n for NN / TN
        const auto at = rand_vec(rng, kk * m);   // k x m for TN
        std::vector<double> c0(m * n), c1(m * n);

        naive_gemm_nt(m, n, kk, a.data(), kk, bt.data(), kk, c0.data(), n, false);
        k.gemm_nt(m, n, kk, a.data(), kk, bt.data(), kk, c1.data(), n, false);
        for (std::size_t i = 0; i < m * n; ++i) CHECK(c1[i] == doctest::Approx(c0[i]).epsilon(1e-12));

        naive_gemm_nn(m, n, kk, a.data(), kk, bn.data(), n, c0.data(), n, false);
        k.gemm_nn(m, n, kk, a.data(), kk, bn.data(), n, c1.data(), n, false);
        for (std::size_t i = 0; i < m * n; ++i) CHECK(c1[i] == doctest::Approx(c0[i]).epsilon(1e-12));

        naive_gemm_tn(m, n, kk, at.data(), m, bn.data(), n, c0.data(), n, false);
        k.gemm_tn(m, n, kk, at.data(), m, bn.data(), n, c1.data(), n, false);
        for (std::size_t i = 0; i < m * n; ++i) CHECK(c1[i] == doctest::Approx(c0[i]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("gemm accumulate adds into the output") {
  StreamRng rng(7);
  const Ops& k = kernels::ops();
  const std::size_t m = 5, n = 9, kk = 13;
  const auto a = rand_vec(rng, m * kk);
  const auto b = rand_vec(rng, n * kk);
  auto c = rand_vec(rng, m * n);
  std::vector<double> fresh(m * n, 0.0);
  k.gemm_nt(m, n, kk, a.data(), kk, b.data(), kk, fresh.data(), n, false);
  std::vector<double> accd = c;
  k.gemm_nt(m, n, kk, a.data(), kk, b.data(), kk, accd.data(), n, true);
  for (std::size_t i = 0; i < m * n; ++i) {
    CHECK(accd[i] == doctest::Approx(c[i] + fresh[i]).epsilon(1e-12));
  }
}

TEST_CASE("exact kernels: scalar semantics") {
  StreamRng rng(3);
  const Ops& k = kernels::ops_for(kernels::Backend::kScalar);
  for (std::size_t n : kSizes) {
    auto x = rand_vec(rng, n);
    auto y = rand_vec(rng, n);
    auto y2 = y;
    k.axpy(n, 1.5, x.data(), y.data());
    for (std::size_t i = 0; i < n; ++i) CHECK(y[i] == y2[i] + 1.5 * x[i]);

    auto acc = rand_vec(rng, n);
    auto acc2 = acc;
    k.scale_max(n, x.data(), 0.7, acc.data());
    for (std::size_t i = 0; i < n; ++i) CHECK(acc[i] == std::max(acc2[i], x[i] * 0.7));

    auto r = x;
    k.relu(n, r.data());
    for (std::size_t i = 0; i < n; ++i) CHECK(r[i] == std::max(0.0, x[i]));

    auto dy = rand_vec(rng, n);
    auto dy2 = dy;
    k.relu_mask(n, x.data(), dy.data());
    for (std::size_t i = 0; i < n; ++i) CHECK(dy[i] == (x[i] > 0.0 ? dy2[i] : 0.0));
  }
}

TEST_CASE("adam_step matches the textbook update") {
  StreamRng rng(11);
  const Ops& k = kernels::ops();
  const std::size_t n = 37;
  auto p = rand_vec(rng, n);
  auto g = rand_vec(rng, n);
  auto m = rand_vec(rng, n, 0.0, 0.5);
  auto v = rand_vec(rng, n, 0.0, 0.5);
  auto pr = p, mr = m, vr = v;
  const double lr_t = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  k.adam_step(n, p.data(), g.data(), m.data(), v.data(), lr_t, b1, b2, eps);
  for (std::size_t i = 0; i < n; ++i) {
    const double mi = b1 * mr[i] + (1.0 - b1) * g[i];
    const double vi = b2 * vr[i] + (1.0 - b2) * g[i] * g[i];
    const double pi = pr[i] - lr_t * mi / (std::sqrt(vi) + eps);
    CHECK(m[i] == mi);
    CHECK(v[i] == vi);
    CHECK(p[i] == pi);
  }
}

TEST_CASE("vector backend matches scalar: bitwise for exact kernels") {
  if (!kernels::avx2_available()) return;
  const Ops& s = kernels::ops_for(kernels::Backend::kScalar);
  const Ops& a = kernels::ops_for(kernels::Backend::kAvx2);
  StreamRng rng(99);
  for (std::size_t n : kSizes) {
    const auto x = rand_vec(rng, n);
    auto y1 = rand_vec(rng, n);
    auto y2 = y1;
    s.axpy(n, -0.37, x.data(), y1.data());
    a.axpy(n, -0.37, x.data(), y2.data());
    CHECK(std::memcmp(y1.data(), y2.data(), n * sizeof(double)) == 0);

    auto m1 = rand_vec(rng, n);
    auto m2 = m1;
    s.scale_max(n, x.data(), 1.234, m1.data());
    a.scale_max(n, x.data(), 1.234, m2.data());
    CHECK(std::memcmp(m1.data(), m2.data(), n * sizeof(double)) == 0);

    auto r1 = x, r2 = x;
    s.relu(n, r1.data());
    a.relu(n, r2.data());
    CHECK(std::memcmp(r1.data(), r2.data(), n * sizeof(double)) == 0);

    auto d1 = rand_vec(rng, n);
    auto d2 = d1;
    s.relu_mask(n, x.data(), d1.data());
    a.relu_mask(n, x.data(), d2.data());
    CHECK(std::memcmp(d1.data(), d2.data(), n * sizeof(double)) == 0);

    auto p1 = rand_vec(rng, n);
    auto p2 = p1;
    auto g = rand_vec(rng, n);
    auto mm1 = rand_vec(rng, n, 0.0, 0.5);
    auto mm2 = mm1;
    auto v1 = rand_vec(rng, n, 0.0, 0.5);
    auto v2 = v1;
    s.adam_step(n, p1.data(), g.data(), mm1.data(), v1.data(), 0.02, 0.9, 0.999, 1e-8);
    a.adam_step(n, p2.data(), g.data(), mm2.data(), v2.data(), 0.02, 0.9, 0.999, 1e-8);
    CHECK(std::memcmp(p1.data(), p2.data(), n * sizeof(double)) == 0);
    CHECK(std::memcmp(mm1.data(), mm2.data(), n * sizeof(double)) == 0);
    CHECK(std::memcmp(v1.data(), v2.data(), n * sizeof(double)) == 0);
  }
}

TEST_CASE("vector backend matches scalar: tolerance for reductions") {
  if (!kernels::avx2_available()) return;
  const Ops& s = kernels::ops_for(kernels::Backend::kScalar);
  const Ops& a = kernels::ops_for(kernels::Backend::kAvx2);
  StreamRng rng(123);
  for (std::size_t n : kSizes) {
    const auto x = rand_vec(rng, n);
    const auto y = rand_vec(rng, n);
    CHECK(a.dot(n, x.data(), y.data()) ==
          doctest::Approx(s.dot(n, x.data(), y.data())).epsilon(1e-12));
  }
  // One realistically shaped layer multiply per variant.
  const std::size_t m = 33, n = 65, kk = 129;
  const auto A = rand_vec(rng, m * kk);
  const auto Bt = rand_vec(rng, n * kk);
  const auto Bn = rand_vec(rng, kk * n);
  const auto At = rand_vec(rng, kk * m);
  std::vector<double> c1(m * n), c2(m * n);
  s.gemm_nt(m, n, kk, A.data(), kk, Bt.data(), kk, c1.data(), n, false);
  a.gemm_nt(m, n, kk, A.data(), kk, Bt.data(), kk, c2.data(), n, false);
  for (std::size_t i = 0; i < m * n; ++i) CHECK(c2[i] == doctest::Approx(c1[i]).epsilon(1e-12));
  s.gemm_nn(m, n, kk, A.data(), kk, Bn.data(), n, c1.data(), n, false);
  a.gemm_nn(m, n, kk, A.data(), kk, Bn.data(), n, c2.data(), n, false);
  for (std::size_t i = 0; i < m * n; ++i) CHECK(c2[i] == doctest::Approx(c1[i]).epsilon(1e-12));
  s.gemm_tn(m, n, kk, At.data(), m, Bn.data(), n, c1.data(), n, false);
  a.gemm_tn(m, n, kk, At.data(), m, Bn.data(), n, c2.data(), n, false);
  for (std::size_t i = 0; i < m * n; ++i) CHECK(c2[i] == doctest::Approx(c1[i]).epsilon(1e-12));
}

TEST_CASE("backend selection reports a valid table") {
  CHECK(kernels::backend_name(kernels::active_backend()) != nullptr);
  const Ops& k = kernels::ops();
  CHECK(k.gemm_nt != nullptr);
  CHECK(k.dot != nullptr);
}
