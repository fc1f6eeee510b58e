#include <cmath>

#include "blm/kernels.hpp"

namespace blm::simd {

namespace {

template <class T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <class T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

template <class T>
void adam(T* p, T* m, T* v, const T* g, std::size_t n, const AdamCoeffs<T>& c) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = c.beta1 * m[i] + c.one_minus_beta1 * g[i];
    v[i] = c.beta2 * v[i] + c.one_minus_beta2 * (g[i] * g[i]);
    const T mhat = m[i] / c.bias1;
    const T vhat = v[i] / c.bias2;
    p[i] = p[i] - (c.lr * mhat) / (std::sqrt(vhat) + c.eps);
  }
}

}  // namespace

template <>
const KernelTable<float>& scalar_kernels<float>() noexcept {
  static const KernelTable<float> t{Isa::Scalar, &dot<float>, &axpy<float>, &adam<float>};
  return t;
}

template <>
const KernelTable<double>& scalar_kernels<double>() noexcept {
  static const KernelTable<double> t{Isa::Scalar, &dot<double>, &axpy<double>, &adam<double>};
  return t;
}

}  // namespace blm::simd
