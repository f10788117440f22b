#pragma once

#include <cmath>
#include <numbers>
#include <span>

#include "n2n/nn/unet.hpp"

namespace n2n::nn {

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
};

/// Bias-corrected ADAM update of every parameter; increments state.step.
template <class T>
void adam_step(NetworkState<T>& state, std::span<const Array<T>> grads, double lr, const AdamParams& hp = {}) {
  require(grads.size() == state.parameters.size(), "adam_step: gradient count does not match parameter count");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    require(grads[i].shape() == state.parameters[i].shape(),
            "adam_step: gradient " + shape_string(grads[i].shape()) + " does not match parameter " +
                shape_string(state.parameters[i].shape()));
    if (!grads[i].all_finite())
      throw NumericalError("adam_step: non-finite gradient in parameter " + std::to_string(i) + " at step " +
                           std::to_string(state.step + 1));
  }
  const long t = state.step + 1;
  const double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(hp.beta2, static_cast<double>(t));
  const T b1 = static_cast<T>(hp.beta1), b2 = static_cast<T>(hp.beta2);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    Array<T>& theta = state.parameters[i].value();
    Array<T>& m = state.adam_m[i];
    Array<T>& v = state.adam_v[i];
    const Array<T>& g = grads[i];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m[j] = b1 * m[j] + (T(1) - b1) * g[j];
      v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      theta[j] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + hp.epsilon));
    }
  }
  state.step = t;
}

/// Uses (and then clears) the gradients accumulated on the parameter tensors.
template <class T>
void adam_step(NetworkState<T>& state, double lr, const AdamParams& hp = {}) {
  std::vector<Array<T>> grads;
  grads.reserve(state.parameters.size());
  for (auto& p : state.parameters) grads.push_back(p.has_grad() ? p.grad() : Array<T>(p.shape()));
  adam_step<T>(state, grads, lr, hp);
  for (auto& p : state.parameters) p.zero_grad();
}

/// Constant rate, then a half-cosine rampdown to zero over the last 10% of steps.
inline double lr_schedule(long step, long total_steps, double base_lr) {
  require(step >= 0 && step <= total_steps, "lr_schedule: step out of range");
  const double start = 0.9 * static_cast<double>(total_steps);
  if (static_cast<double>(step) <= start) return base_lr;
  const double t = (static_cast<double>(step) - start) / (static_cast<double>(total_steps) - start);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

}  // namespace n2n::nn
