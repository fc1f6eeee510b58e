#include "blm/kernels.hpp"

namespace blm::simd {

template <>
const KernelTable<float>* avx2_kernels<float>() noexcept {
  return nullptr;
}

template <>
const KernelTable<double>* avx2_kernels<double>() noexcept {
  return nullptr;
}

}  // namespace blm::simd
