#include <atomic>
#include <cstdlib>
#include <string>

#include "blm/error.hpp"
#include "blm/kernels.hpp"

namespace blm::simd {

namespace {

Isa initial_isa() {
  if (const char* env = std::getenv("BLM_ISA"); env && *env) {
    const Isa requested = parse_isa(env);
    if (cpu_supports(requested)) return requested;
  }
  return best_isa();
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

}  // namespace

std::string_view to_string(Isa isa) noexcept { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

Isa parse_isa(std::string_view s) {
  if (s == "scalar") return Isa::Scalar;
  if (s == "avx2") return Isa::Avx2;
  throw Error(Errc::UsageError, "unknown ISA '" + std::string(s) + "' (expected scalar or avx2)");
}

bool cpu_supports(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(__x86_64__) || defined(__i386__)
      if (avx2_kernels<float>() == nullptr) return false;
      __builtin_cpu_init();
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

Isa best_isa() noexcept { return cpu_supports(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar; }

void select_isa(Isa isa) {
  if (!cpu_supports(isa)) throw Error(Errc::UsageError, "ISA " + std::string(to_string(isa)) + " not available");
  active().store(isa);
}

Isa active_isa() noexcept { return active().load(); }

template <class T>
const KernelTable<T>& kernels_for(Isa isa) {
  if (isa == Isa::Avx2) {
    if (!cpu_supports(Isa::Avx2)) throw Error(Errc::UsageError, "AVX2 kernels not available");
    return *avx2_kernels<T>();
  }
  return scalar_kernels<T>();
}

template <class T>
const KernelTable<T>& kernels() noexcept {
  return active_isa() == Isa::Avx2 ? *avx2_kernels<T>() : scalar_kernels<T>();
}

template const KernelTable<float>& kernels_for<float>(Isa);
template const KernelTable<double>& kernels_for<double>(Isa);
template const KernelTable<float>& kernels<float>() noexcept;
template const KernelTable<double>& kernels<double>() noexcept;

}  // namespace blm::simd
