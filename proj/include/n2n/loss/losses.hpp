#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "n2n/core/ops.hpp"

namespace n2n::loss {

enum class LossKind { l2, l2_masked, l1, l0_annealed, l_hdr, relative_mse };

inline std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::l2: return "l2";
    case LossKind::l2_masked: return "l2_masked";
    case LossKind::l1: return "l1";
    case LossKind::l0_annealed: return "l0_annealed";
    case LossKind::l_hdr: return "l_hdr";
    case LossKind::relative_mse: return "relative_mse";
  }
  return "?";
}

inline LossKind loss_kind_from_string(const std::string& s) {
  for (auto k : {LossKind::l2, LossKind::l2_masked, LossKind::l1, LossKind::l0_annealed, LossKind::l_hdr,
                 LossKind::relative_mse})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown loss kind '" + s + "'");
}

inline constexpr double kL0Epsilon = 1e-8;
inline constexpr double kHdrOffset = 0.01;

struct LossSpec {
  LossKind kind = LossKind::l2;
  double gamma = 2.0;
  double epsilon = kL0Epsilon;

  void validate() const {
    if (!(gamma >= 0.0 && gamma <= 2.0)) throw ConfigError("loss gamma must lie in [0,2]");
    if (!(epsilon > 0.0)) throw ConfigError("loss epsilon must be positive");
  }
};

namespace detail {

template <class T>
void require_match(const Tensor<T>& pred, const Array<T>& target, const char* op) {
  require(pred.shape() == target.shape(), std::string(op) + ": prediction " + shape_string(pred.shape()) +
                                              " does not match target " + shape_string(target.shape()));
}

}  // namespace detail

/// Mean of (m*(pred - target))^2 over entries with m = 1. Without a mask every entry counts.
/// An all-zero mask gives 0 and sets *empty_mask.
template <class T>
Tensor<T> l2(const Tensor<T>& pred, const Array<T>& target, const Array<T>* mask = nullptr, bool* empty_mask = nullptr) {
  detail::require_match(pred, target, "l2");
  if (mask) require(mask->shape() == target.shape(), "l2: mask " + shape_string(mask->shape()) + " does not match target");
  const std::size_t n = target.size();
  Array<T> resid(target.shape());
  double count = 0.0, acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const T m = mask ? (*mask)[i] : T(1);
    resid[i] = m * (pred.value()[i] - target[i]);
    count += static_cast<double>(m);
    acc += static_cast<double>(resid[i]) * resid[i];
  }
  if (empty_mask) *empty_mask = count == 0.0;
  const T inv = count > 0.0 ? static_cast<T>(1.0 / count) : T(0);
  std::optional<Array<T>> m;
  if (mask) m = *mask;
  return Tensor<T>::from_op(Array<T>({1}, static_cast<T>(acc) * inv), {pred},
                            [resid = std::move(resid), m = std::move(m), inv](Node<T>& self) {
                              auto& g = n2n::detail::parent_grad(self, 0);
                              const T up = self.grad[0] * T(2) * inv;
                              for (std::size_t i = 0; i < g.size(); ++i) g[i] += up * resid[i] * (m ? (*m)[i] : T(1));
                            });
}

/// Mean absolute deviation; subgradient 0 where pred == target.
template <class T>
Tensor<T> l1(const Tensor<T>& pred, const Array<T>& target) {
  detail::require_match(pred, target, "l1");
  double acc = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) acc += std::abs(static_cast<double>(pred.value()[i]) - target[i]);
  const T inv = T(1) / static_cast<T>(target.size());
  return Tensor<T>::from_op(Array<T>({1}, static_cast<T>(acc / target.size())), {pred}, [target, inv](Node<T>& self) {
    const auto& p = n2n::detail::parent_value(self, 0);
    auto& g = n2n::detail::parent_grad(self, 0);
    const T up = self.grad[0] * inv;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T d = p[i] - target[i];
      g[i] += up * static_cast<T>((d > T(0)) - (d < T(0)));
    }
  });
}

/// Mean of (|pred - target| + epsilon)^gamma, the annealed mode-seeking loss.
template <class T>
Tensor<T> l0_annealed(const Tensor<T>& pred, const Array<T>& target, double gamma, double epsilon = kL0Epsilon) {
  detail::require_match(pred, target, "l0_annealed");
  require(gamma >= 0.0 && gamma <= 2.0, "l0_annealed: gamma must lie in [0,2]");
  double acc = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i)
    acc += std::pow(std::abs(static_cast<double>(pred.value()[i]) - target[i]) + epsilon, gamma);
  const double inv = 1.0 / static_cast<double>(target.size());
  return Tensor<T>::from_op(Array<T>({1}, static_cast<T>(acc * inv)), {pred}, [target, gamma, epsilon, inv](Node<T>& self) {
    const auto& p = n2n::detail::parent_value(self, 0);
    auto& g = n2n::detail::parent_grad(self, 0);
    const double up = self.grad[0] * inv;
    if (gamma == 0.0) return;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double d = static_cast<double>(p[i]) - target[i];
      const double s = (d > 0.0) - (d < 0.0);
      g[i] += static_cast<T>(up * gamma * std::pow(std::abs(d) + epsilon, gamma - 1.0) * s);
    }
  });
}

/// Linear decay of the L0 exponent from 2 at step 0 to 0 at the last step.
inline double anneal_gamma(long step, long total_steps) {
  require(step >= 0 && step <= total_steps, "anneal_gamma: step out of range");
  if (total_steps == 0) return 2.0;
  return 2.0 * (1.0 - static_cast<double>(step) / static_cast<double>(total_steps));
}

/// (v/(1+v))^(1/2.2); maps v >= 0 into [0,1).
inline double tone_map(double v) {
  require(v >= 0.0, "tone_map: negative luminance");
  return std::pow(v / (1.0 + v), 1.0 / 2.2);
}

template <class T>
Tensor<T> tone_map(const Tensor<T>& v) {
  Array<T> out(v.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<T>(tone_map(static_cast<double>(v.value()[i])));
  return Tensor<T>::from_op(std::move(out), {v}, [](Node<T>& self) {
    const auto& x = n2n::detail::parent_value(self, 0);
    auto& g = n2n::detail::parent_grad(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double xv = x[i];
      if (xv <= 0.0) continue;
      const double u = xv / (1.0 + xv);
      g[i] += static_cast<T>(self.grad[i] * (1.0 / 2.2) * std::pow(u, 1.0 / 2.2 - 1.0) / ((1.0 + xv) * (1.0 + xv)));
    }
  });
}

/// Mean of (pred - target)^2 / (pred + 0.01)^2 with the denominator cut from the graph, so the
/// gradient w.r.t. pred is 2(pred - target)/(pred + 0.01)^2 / count.
template <class T>
Tensor<T> l_hdr(const Tensor<T>& pred, const Array<T>& target) {
  detail::require_match(pred, target, "l_hdr");
  const Tensor<T> resid = sub(pred, Tensor<T>(target));
  const Tensor<T> denom = square(add_scalar(pred.detach(), static_cast<T>(kHdrOffset)));
  return mean(div(square(resid), denom));
}

/// Mean of (pred - target)^2 / (target + epsilon)^2. Evaluation metric.
template <class T>
double relative_mse(const Array<T>& pred, const Array<T>& target, double epsilon = kHdrOffset) {
  require(pred.shape() == target.shape(), "relative_mse: shape mismatch " + shape_string(pred.shape()) + " vs " +
                                              shape_string(target.shape()));
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    require(target[i] >= T(0), "relative_mse: negative target");
    const double d = static_cast<double>(pred[i]) - target[i];
    const double q = static_cast<double>(target[i]) + epsilon;
    acc += d * d / (q * q);
  }
  return acc / static_cast<double>(pred.size());
}

/// Dispatch used by the trainer. `mask` only applies to l2_masked.
template <class T>
Tensor<T> evaluate_loss(const LossSpec& spec, const Tensor<T>& pred, const Array<T>& target, const Array<T>* mask,
                        double gamma) {
  switch (spec.kind) {
    case LossKind::l2: return l2(pred, target);
    case LossKind::l2_masked: return l2(pred, target, mask);
    case LossKind::l1: return l1(pred, target);
    case LossKind::l0_annealed: return l0_annealed(pred, target, gamma, spec.epsilon);
    case LossKind::l_hdr: return l_hdr(pred, target);
    case LossKind::relative_mse: break;
  }
  throw ConfigError("relative_mse is an evaluation metric, not a training loss");
}

}  // namespace n2n::loss
