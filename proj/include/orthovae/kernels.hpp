#pragma once

// Dense inner-loop kernels used by the MLP forward/backward passes.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2+FMA variant. The variant is picked once at startup from the CPU
// features (override with ORTHOVAE_ISA=scalar|avx2). Both variants are
// exposed directly so tests can compare them.
//
// All matrices are row-major with explicit leading dimensions.

#include <cstddef>
#include <string_view>

namespace orthovae::kernels {

enum class Isa { scalar, avx2 };

struct KernelTable {
  Isa isa;
  // sum_k a[k] * b[k]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
  // C(m x n) = [C +] A(m x k) * B(n x k)^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                  const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate);
  // C(m x n) += A(m x k) * B(k x n)
  void (*gemm_nn_acc)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                      std::size_t lda, const double* b, std::size_t ldb, double* c,
                      std::size_t ldc);
  // C(m x n) += A(k x m)^T * B(k x n)
  void (*gemm_tn_acc)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                      std::size_t lda, const double* b, std::size_t ldb, double* c,
                      std::size_t ldc);
};

bool isa_available(Isa isa) noexcept;
const KernelTable& table_for(Isa isa);

/// Table used by the forwarding functions below.
const KernelTable& active() noexcept;
Isa active_isa() noexcept;
/// Switch the process-wide variant. Not synchronized with running kernels;
/// call before starting work. Throws if the ISA is unavailable.
void select_isa(Isa isa);

std::string_view isa_name(Isa isa) noexcept;

namespace scalar {
extern const KernelTable table;
}
#if defined(ORTHOVAE_WITH_AVX2)
namespace avx2 {
extern const KernelTable table;
}
#endif

inline double dot(const double* a, const double* b, std::size_t n) {
  return active().dot(a, b, n);
}
inline void axpy(std::size_t n, double alpha, const double* x, double* y) {
  active().axpy(n, alpha, x, y);
}
inline void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a,
                    std::size_t lda, const double* b, std::size_t ldb, double* c,
                    std::size_t ldc, bool accumulate) {
  active().gemm_nt(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}
inline void gemm_nn_acc(std::size_t m, std::size_t n, std::size_t k, const double* a,
                        std::size_t lda, const double* b, std::size_t ldb, double* c,
                        std::size_t ldc) {
  active().gemm_nn_acc(m, n, k, a, lda, b, ldb, c, ldc);
}
inline void gemm_tn_acc(std::size_t m, std::size_t n, std::size_t k, const double* a,
                        std::size_t lda, const double* b, std::size_t ldb, double* c,
                        std::size_t ldc) {
  active().gemm_tn_acc(m, n, k, a, lda, b, ldb, c, ldc);
}

}  // namespace orthovae::kernels
