#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <cstring>

#include "n2n/core/tensor.hpp"

namespace n2n::nn {

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// col has shape (C*9, H*W); entry (c*9+ky*3+kx, y*W+x) = img[c, y+ky-1, x+kx-1] (zero outside).
template <class T>
void im2col3x3(const T* img, int channels, int h, int w, T* col) {
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < channels; ++c) {
    const T* plane = img + c * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        T* dst = col + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * hw;
        const int dx = kx - 1;
        const int x0 = std::max(0, -dx);
        const int x1 = std::min(w, w - dx);
        for (int y = 0; y < h; ++y) {
          T* row = dst + static_cast<std::size_t>(y) * w;
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) {
            std::fill(row, row + w, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(sy) * w;
          for (int x = 0; x < x0; ++x) row[x] = T(0);
          std::memcpy(row + x0, src + x0 + dx, sizeof(T) * (x1 - x0));
          for (int x = x1; x < w; ++x) row[x] = T(0);
        }
      }
    }
  }
}

// Adjoint of im2col3x3: scatter-add col back into img.
template <class T>
void col2im3x3(const T* col, int channels, int h, int w, T* img) {
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < channels; ++c) {
    T* plane = img + c * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const T* src = col + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * hw;
        const int dx = kx - 1;
        const int x0 = std::max(0, -dx);
        const int x1 = std::min(w, w - dx);
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          const T* row = src + static_cast<std::size_t>(y) * w;
          T* dst = plane + static_cast<std::size_t>(sy) * w + dx;
          for (int x = x0; x < x1; ++x) dst[x] += row[x];
        }
      }
    }
  }
}

}  // namespace detail

/// 3x3 convolution with zero "same" padding. weight (Cout, Cin, 3, 3), bias (Cout).
template <class T>
Tensor<T> conv2d_same(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  const Shape& is = input.shape();
  const Shape& ws = weight.shape();
  if (is.size() != 4 || ws.size() != 4 || ws[2] != 3 || ws[3] != 3 || ws[1] != is[1] || bias.size() != static_cast<std::size_t>(ws[0]))
    throw ContractViolation("conv2d_same: input " + shape_string(is) + " incompatible with weight " + shape_string(ws) +
                            " and bias " + shape_string(bias.shape()));
  const int n = is[0], cin = is[1], h = is[2], w = is[3], cout = ws[0];
  const int k = cin * 9;
  const int hw = h * w;
  using Mat = detail::RowMat<T>;
  using CMap = Eigen::Map<const Mat>;
  using MMap = Eigen::Map<Mat>;

  Array<T> out = Array<T>::image(n, cout, h, w);
  Buffer<T> col(static_cast<std::size_t>(k) * hw);
  CMap wm(weight.value().data(), cout, k);
  for (int b = 0; b < n; ++b) {
    detail::im2col3x3(input.value().data() + input.value().offset(b, 0, 0, 0), cin, h, w, col.data());
    MMap om(out.data() + out.offset(b, 0, 0, 0), cout, hw);
    om.noalias() = wm * CMap(col.data(), k, hw);
    for (int c = 0; c < cout; ++c) om.row(c).array() += bias.value()[c];
  }

  return Tensor<T>::from_op(std::move(out), {input, weight, bias}, [n, cin, h, w, cout, k, hw](Node<T>& self) {
    const Array<T>& in = n2n::detail::parent_value(self, 0);
    const Array<T>& wt = n2n::detail::parent_value(self, 1);
    const bool gi = n2n::detail::wants_grad(self, 0);
    const bool gw = n2n::detail::wants_grad(self, 1);
    const bool gb = n2n::detail::wants_grad(self, 2);
    Buffer<T> col(static_cast<std::size_t>(k) * hw);
    CMap wm(wt.data(), cout, k);
    for (int b = 0; b < n; ++b) {
      CMap g(self.grad.data() + self.grad.offset(b, 0, 0, 0), cout, hw);
      if (gb) {
        auto& bg = n2n::detail::parent_grad(self, 2);
        for (int c = 0; c < cout; ++c) bg[c] += g.row(c).sum();
      }
      if (gw) {
        detail::im2col3x3(in.data() + in.offset(b, 0, 0, 0), cin, h, w, col.data());
        MMap wg(n2n::detail::parent_grad(self, 1).data(), cout, k);
        wg.noalias() += g * CMap(col.data(), k, hw).transpose();
      }
      if (gi) {
        MMap cm(col.data(), k, hw);
        cm.noalias() = wm.transpose() * g;
        auto& ig = n2n::detail::parent_grad(self, 0);
        detail::col2im3x3(col.data(), cin, h, w, ig.data() + ig.offset(b, 0, 0, 0));
      }
    }
  });
}

/// 2x2 max pooling, stride 2. Ties go to the first element in row-major order.
template <class T>
Tensor<T> maxpool2(const Tensor<T>& input) {
  const Shape& s = input.shape();
  require(s.size() == 4, "maxpool2: expected NCHW input, got " + shape_string(s));
  require(s[2] % 2 == 0 && s[3] % 2 == 0, "maxpool2: odd spatial dimension in " + shape_string(s));
  const int planes = s[0] * s[1], h = s[2], w = s[3], oh = h / 2, ow = w / 2;
  Array<T> out({s[0], s[1], oh, ow});
  std::vector<std::uint32_t> argmax(out.size());
  const T* src = input.value().data();
  for (int p = 0; p < planes; ++p) {
    const T* plane = src + static_cast<std::size_t>(p) * h * w;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        const std::size_t base = static_cast<std::size_t>(2 * y) * w + 2 * x;
        const std::size_t cand[4] = {base, base + 1, base + w, base + w + 1};
        std::size_t best = cand[0];
        for (int c = 1; c < 4; ++c)
          if (plane[cand[c]] > plane[best]) best = cand[c];
        const std::size_t o = (static_cast<std::size_t>(p) * oh + y) * ow + x;
        out[o] = plane[best];
        argmax[o] = static_cast<std::uint32_t>(p * h * w + best);
      }
    }
  }
  return Tensor<T>::from_op(std::move(out), {input}, [argmax = std::move(argmax)](Node<T>& self) {
    auto& g = n2n::detail::parent_grad(self, 0);
    for (std::size_t o = 0; o < argmax.size(); ++o) g[argmax[o]] += self.grad[o];
  });
}

/// Nearest-neighbour 2x upsampling.
template <class T>
Tensor<T> upsample_nearest2(const Tensor<T>& input) {
  const Shape& s = input.shape();
  require(s.size() == 4, "upsample_nearest2: expected NCHW input, got " + shape_string(s));
  const int planes = s[0] * s[1], h = s[2], w = s[3], oh = 2 * h, ow = 2 * w;
  Array<T> out({s[0], s[1], oh, ow});
  const T* src = input.value().data();
  for (int p = 0; p < planes; ++p)
    for (int y = 0; y < oh; ++y) {
      const T* srow = src + (static_cast<std::size_t>(p) * h + y / 2) * w;
      T* drow = out.data() + (static_cast<std::size_t>(p) * oh + y) * ow;
      for (int x = 0; x < ow; ++x) drow[x] = srow[x / 2];
    }
  return Tensor<T>::from_op(std::move(out), {input}, [planes, h, w](Node<T>& self) {
    auto& g = n2n::detail::parent_grad(self, 0);
    const int ow = 2 * w;
    for (int p = 0; p < planes; ++p)
      for (int y = 0; y < 2 * h; ++y) {
        const T* grow = self.grad.data() + (static_cast<std::size_t>(p) * 2 * h + y) * ow;
        T* drow = g.data() + (static_cast<std::size_t>(p) * h + y / 2) * w;
        for (int x = 0; x < ow; ++x) drow[x / 2] += grow[x];
      }
  });
}

/// Channel concatenation; `a` occupies the leading channels.
template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 4 || sb.size() != 4 || sa[0] != sb[0] || sa[2] != sb[2] || sa[3] != sb[3])
    throw ContractViolation("concat_channels: incompatible shapes " + shape_string(sa) + " and " + shape_string(sb));
  const int n = sa[0], ca = sa[1], cb = sb[1];
  const std::size_t hw = static_cast<std::size_t>(sa[2]) * sa[3];
  Array<T> out({n, ca + cb, sa[2], sa[3]});
  for (int i = 0; i < n; ++i) {
    std::copy_n(a.value().data() + i * ca * hw, ca * hw, out.data() + i * (ca + cb) * hw);
    std::copy_n(b.value().data() + i * cb * hw, cb * hw, out.data() + (i * (ca + cb) + ca) * hw);
  }
  return Tensor<T>::from_op(std::move(out), {a, b}, [n, ca, cb, hw](Node<T>& self) {
    for (int i = 0; i < n; ++i) {
      const T* g = self.grad.data() + i * (ca + cb) * hw;
      if (n2n::detail::wants_grad(self, 0)) {
        T* ga = n2n::detail::parent_grad(self, 0).data() + i * ca * hw;
        for (std::size_t j = 0; j < ca * hw; ++j) ga[j] += g[j];
      }
      if (n2n::detail::wants_grad(self, 1)) {
        T* gb = n2n::detail::parent_grad(self, 1).data() + i * cb * hw;
        for (std::size_t j = 0; j < cb * hw; ++j) gb[j] += g[ca * hw + j];
      }
    }
  });
}

/// max(x, alpha*x) for 0 <= alpha < 1; the subgradient at 0 is alpha.
template <class T>
Tensor<T> leaky_relu(const Tensor<T>& input, T alpha) {
  Array<T> out = map(input.value(), [alpha](T v) { return v > T(0) ? v : alpha * v; });
  return Tensor<T>::from_op(std::move(out), {input}, [alpha](Node<T>& self) {
    const auto& x = n2n::detail::parent_value(self, 0);
    auto& g = n2n::detail::parent_grad(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * (x[i] > T(0) ? T(1) : alpha);
  });
}

}  // namespace n2n::nn
