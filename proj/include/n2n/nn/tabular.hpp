#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "n2n/core/tensor.hpp"

namespace n2n::nn {

/// Maps each value in [lo, hi] to one of `bins` equal cells; out-of-range values clamp.
inline int quantize(double v, int bins, double lo = 0.0, double hi = 1.0) {
  const int b = static_cast<int>(std::floor((v - lo) / (hi - lo) * bins));
  return std::clamp(b, 0, bins - 1);
}

/// out[i] = table[index[i]]. Gradients scatter-add back into the table.
template <class T>
Tensor<T> gather(const Tensor<T>& table, std::vector<int> index, const Shape& out_shape) {
  require(index.size() == shape_size(out_shape), "gather: index count does not match output shape " + shape_string(out_shape));
  Array<T> out(out_shape);
  const int n = static_cast<int>(table.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    require(index[i] >= 0 && index[i] < n, "gather: index out of range");
    out[i] = table.value()[index[i]];
  }
  return Tensor<T>::from_op(std::move(out), {table}, [index = std::move(index)](Node<T>& self) {
    auto& g = n2n::detail::parent_grad(self, 0);
    for (std::size_t i = 0; i < index.size(); ++i) g[index[i]] += self.grad[i];
  });
}

/// Lookup-table regressor: one free output per (quantized input value, channel).
/// Unbounded capacity per input bin, so trained with L2 each cell converges to the mean
/// target of the pixels that land in it.
template <class T>
struct TabularModel {
  int bins = 64;
  int channels = 1;
  Tensor<T> table;

  TabularModel(int bins_, int channels_) : bins(bins_), channels(channels_), table(Array<T>({bins_ * channels_}), true) {
    require(bins > 0 && channels > 0, "tabular model needs positive bins and channels");
  }

  std::vector<int> indices(const Array<T>& input) const {
    require(input.shape().size() == 4 && input.channels() == channels,
            "tabular model expects (N," + std::to_string(channels) + ",H,W), got " + shape_string(input.shape()));
    std::vector<int> idx(input.size());
    const std::size_t plane = static_cast<std::size_t>(input.height()) * input.width();
    for (std::size_t i = 0; i < input.size(); ++i) {
      const int c = static_cast<int>((i / plane) % channels);
      idx[i] = c * bins + quantize(static_cast<double>(input[i]), bins);
    }
    return idx;
  }

  Tensor<T> forward(const Array<T>& input) const { return gather(table, indices(input), input.shape()); }
};

}  // namespace n2n::nn
