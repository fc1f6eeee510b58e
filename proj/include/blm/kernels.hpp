#pragma once

// Inner-loop kernels for the numerical core. Every kernel has a scalar
// reference implementation; SIMD variants are compiled in separate
// translation units and chosen at runtime from the CPU's capabilities.
//
// Elementwise kernels (axpy, adam) use the same operation order as the scalar
// code without fused multiply-add, so all variants agree bit for bit.
// Reductions (dot) sum in a different order and agree to rounding only.
// Within one variant every kernel is deterministic.

#include <cstddef>
#include <string_view>

namespace blm::simd {

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa) noexcept;
Isa parse_isa(std::string_view s);

template <class T>
struct AdamCoeffs {
  T lr;
  T beta1;
  T beta2;
  T one_minus_beta1;
  T one_minus_beta2;
  T bias1;  // 1 - beta1^t
  T bias2;  // 1 - beta2^t
  T eps;
};

template <class T>
struct KernelTable {
  Isa isa;
  T (*dot)(const T* a, const T* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(T alpha, const T* x, T* y, std::size_t n);
  void (*adam)(T* param, T* m, T* v, const T* grad, std::size_t n, const AdamCoeffs<T>& c);
};

template <class T>
const KernelTable<T>& scalar_kernels() noexcept;

// nullptr when the variant was not compiled in.
template <class T>
const KernelTable<T>* avx2_kernels() noexcept;

bool cpu_supports(Isa isa) noexcept;
Isa best_isa() noexcept;

// Process-wide selection. Defaults to BLM_ISA from the environment when set
// ("scalar" or "avx2"), else best_isa(). Throws if the ISA is unsupported.
void select_isa(Isa isa);
Isa active_isa() noexcept;

template <class T>
const KernelTable<T>& kernels() noexcept;

template <class T>
const KernelTable<T>& kernels_for(Isa isa);

}  // namespace blm::simd
