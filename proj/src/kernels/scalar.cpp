#include "orthovae/kernels.hpp"

namespace orthovae::kernels::scalar {

namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * lda;
    double* ci = c + i * ldc;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = dot(ai, b + j * ldb, k);
      ci[j] = accumulate ? ci[j] + v : v;
    }
  }
}

void gemm_nn_acc(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                 const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * ldc;
    for (std::size_t p = 0; p < k; ++p) axpy(n, a[i * lda + p], b + p * ldb, ci);
  }
}

void gemm_tn_acc(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                 const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * ldc;
    for (std::size_t p = 0; p < k; ++p) axpy(n, a[p * lda + i], b + p * ldb, ci);
  }
}

}  // namespace

const KernelTable table{Isa::scalar, &dot, &axpy, &gemm_nt, &gemm_nn_acc, &gemm_tn_acc};

}  // namespace orthovae::kernels::scalar
