#pragma once

#include <cmath>

#include "n2n/core/tensor.hpp"

namespace n2n {

namespace detail {

template <class T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  require(a.shape() == b.shape(),
          std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
}

}  // namespace detail

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "add");
  Array<T> out = a.value();
  out += b.value();
  return Tensor<T>::from_op(std::move(out), {a, b}, [](Node<T>& self) {
    for (std::size_t k = 0; k < 2; ++k)
      if (detail::wants_grad(self, k)) detail::parent_grad(self, k) += self.grad;
  });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "sub");
  Array<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return Tensor<T>::from_op(std::move(out), {a, b}, [](Node<T>& self) {
    if (detail::wants_grad(self, 0)) detail::parent_grad(self, 0) += self.grad;
    if (detail::wants_grad(self, 1)) {
      auto& g = detail::parent_grad(self, 1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "mul");
  Array<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return Tensor<T>::from_op(std::move(out), {a, b}, [](Node<T>& self) {
    const auto& av = detail::parent_value(self, 0);
    const auto& bv = detail::parent_value(self, 1);
    if (detail::wants_grad(self, 0)) {
      auto& g = detail::parent_grad(self, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bv[i];
    }
    if (detail::wants_grad(self, 1)) {
      auto& g = detail::parent_grad(self, 1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * av[i];
    }
  });
}

/// Elementwise a / b.
template <class T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "div");
  Array<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] / b.value()[i];
  return Tensor<T>::from_op(std::move(out), {a, b}, [](Node<T>& self) {
    const auto& av = detail::parent_value(self, 0);
    const auto& bv = detail::parent_value(self, 1);
    if (detail::wants_grad(self, 0)) {
      auto& g = detail::parent_grad(self, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / bv[i];
    }
    if (detail::wants_grad(self, 1)) {
      auto& g = detail::parent_grad(self, 1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i] * av[i] / (bv[i] * bv[i]);
    }
  });
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  Array<T> out = map(a.value(), [factor](T v) { return v * factor; });
  return Tensor<T>::from_op(std::move(out), {a}, [factor](Node<T>& self) {
    auto& g = detail::parent_grad(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

template <class T>
Tensor<T> add_scalar(const Tensor<T>& a, T offset) {
  Array<T> out = map(a.value(), [offset](T v) { return v + offset; });
  return Tensor<T>::from_op(std::move(out), {a}, [](Node<T>& self) { detail::parent_grad(self, 0) += self.grad; });
}

template <class T>
Tensor<T> square(const Tensor<T>& a) {
  Array<T> out = map(a.value(), [](T v) { return v * v; });
  return Tensor<T>::from_op(std::move(out), {a}, [](Node<T>& self) {
    const auto& av = detail::parent_value(self, 0);
    auto& g = detail::parent_grad(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += T(2) * av[i] * self.grad[i];
  });
}

template <class T>
Tensor<T> sum(const Tensor<T>& a) {
  T s = 0;
  for (T v : a.value().values()) s += v;
  return Tensor<T>::from_op(Array<T>({1}, s), {a}, [](Node<T>& self) {
    auto& g = detail::parent_grad(self, 0);
    const T up = self.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += up;
  });
}

template <class T>
Tensor<T> mean(const Tensor<T>& a) {
  return scale(sum(a), T(1) / static_cast<T>(a.size()));
}

/// Inner product with a constant weight array; used for random-projection gradient checks.
template <class T>
Tensor<T> dot_const(const Tensor<T>& a, const Array<T>& w) {
  require(a.shape() == w.shape(), "dot_const: shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(w.shape()));
  T s = 0;
  for (std::size_t i = 0; i < w.size(); ++i) s += a.value()[i] * w[i];
  return Tensor<T>::from_op(Array<T>({1}, s), {a}, [w](Node<T>& self) {
    auto& g = detail::parent_grad(self, 0);
    const T up = self.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += up * w[i];
  });
}

}  // namespace n2n
