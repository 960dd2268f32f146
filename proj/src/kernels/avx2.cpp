// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include <immintrin.h>

#include "orthovae/kernels.hpp"

namespace orthovae::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  if (i + 4 <= n) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    i += 4;
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// Four dot products sharing the row of A.
inline void dot4(const double* ai, const double* b0, const double* b1, const double* b2,
                 const double* b3, std::size_t k, double out[4]) {
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  __m256d s2 = _mm256_setzero_pd();
  __m256d s3 = _mm256_setzero_pd();
  std::size_t p = 0;
  for (; p + 4 <= k; p += 4) {
    const __m256d va = _mm256_loadu_pd(ai + p);
    s0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b0 + p), s0);
    s1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b1 + p), s1);
    s2 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b2 + p), s2);
    s3 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b3 + p), s3);
  }
  // transpose-reduce the four accumulators into one vector
  const __m256d t01 = _mm256_hadd_pd(s0, s1);
  const __m256d t23 = _mm256_hadd_pd(s2, s3);
  const __m256d swapped = _mm256_permute2f128_pd(t01, t23, 0x21);
  const __m256d blended = _mm256_blend_pd(t01, t23, 0b1100);
  _mm256_storeu_pd(out, _mm256_add_pd(swapped, blended));
  for (; p < k; ++p) {
    out[0] += ai[p] * b0[p];
    out[1] += ai[p] * b1[p];
    out[2] += ai[p] * b2[p];
    out[3] += ai[p] * b3[p];
  }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
  if (k < 4) {
    scalar::table.gemm_nt(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
    return;
  }
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * lda;
    double* ci = c + i * ldc;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      double r[4];
      dot4(ai, b + j * ldb, b + (j + 1) * ldb, b + (j + 2) * ldb, b + (j + 3) * ldb, k, r);
      for (int q = 0; q < 4; ++q) ci[j + q] = accumulate ? ci[j + q] + r[q] : r[q];
    }
    for (; j < n; ++j) {
      const double v = dot(ai, b + j * ldb, k);
      ci[j] = accumulate ? ci[j] + v : v;
    }
  }
}

// C row i += sum_p coef(p) * B row p, keeping C's tile in registers across p.
template <class Coef>
inline void accumulate_rows(std::size_t n, std::size_t k, Coef coef, const double* b,
                            std::size_t ldb, double* ci) {
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    __m256d c0 = _mm256_loadu_pd(ci + j);
    __m256d c1 = _mm256_loadu_pd(ci + j + 4);
    for (std::size_t p = 0; p < k; ++p) {
      const __m256d va = _mm256_set1_pd(coef(p));
      const double* bp = b + p * ldb + j;
      c0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(bp), c0);
      c1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(bp + 4), c1);
    }
    _mm256_storeu_pd(ci + j, c0);
    _mm256_storeu_pd(ci + j + 4, c1);
  }
  for (; j + 4 <= n; j += 4) {
    __m256d c0 = _mm256_loadu_pd(ci + j);
    for (std::size_t p = 0; p < k; ++p) {
      c0 = _mm256_fmadd_pd(_mm256_set1_pd(coef(p)), _mm256_loadu_pd(b + p * ldb + j), c0);
    }
    _mm256_storeu_pd(ci + j, c0);
  }
  for (; j < n; ++j) {
    double s = ci[j];
    for (std::size_t p = 0; p < k; ++p) s += coef(p) * b[p * ldb + j];
    ci[j] = s;
  }
}

void gemm_nn_acc(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                 const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * lda;
    accumulate_rows(n, k, [ai](std::size_t p) { return ai[p]; }, b, ldb, c + i * ldc);
  }
}

void gemm_tn_acc(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                 const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    accumulate_rows(n, k, [a, lda, i](std::size_t p) { return a[p * lda + i]; }, b, ldb,
                    c + i * ldc);
  }
}

}  // namespace

const KernelTable table{Isa::avx2, &dot, &axpy, &gemm_nt, &gemm_nn_acc, &gemm_tn_acc};

}  // namespace orthovae::kernels::avx2
