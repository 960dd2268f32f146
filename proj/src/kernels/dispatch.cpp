#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "orthovae/kernels.hpp"

namespace orthovae::kernels {

namespace {

bool cpu_has_avx2() noexcept {
#if defined(ORTHOVAE_WITH_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_table() noexcept {
  const char* env = std::getenv("ORTHOVAE_ISA");
  if (env != nullptr && std::string(env) == "scalar") return &scalar::table;
#if defined(ORTHOVAE_WITH_AVX2)
  if (cpu_has_avx2()) return &avx2::table;
#endif
  return &scalar::table;
}

std::atomic<const KernelTable*>& current() noexcept {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

bool isa_available(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
      return cpu_has_avx2();
  }
  return false;
}

const KernelTable& table_for(Isa isa) {
  if (!isa_available(isa)) {
    throw std::runtime_error("kernel ISA not available: " + std::string(isa_name(isa)));
  }
#if defined(ORTHOVAE_WITH_AVX2)
  if (isa == Isa::avx2) return avx2::table;
#endif
  return scalar::table;
}

const KernelTable& active() noexcept { return *current().load(std::memory_order_relaxed); }

Isa active_isa() noexcept { return active().isa; }

void select_isa(Isa isa) { current().store(&table_for(isa), std::memory_order_relaxed); }

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

}  // namespace orthovae::kernels
