#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <new>
#include <numeric>
#include <span>
#include <vector>

#include "n2n/core/error.hpp"

namespace n2n {

using Shape = std::vector<int>;

inline std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    require(d > 0, "non-positive dimension in shape " + shape_string(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

/// Cache-line aligned storage. Vectorized kernels peel unaligned heads at run time, so a fixed
/// base alignment keeps their summation order, and therefore results, independent of the heap.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

template <class T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

/// Dense row-major array. Images use NCHW.
template <class T>
class Array {
 public:
  using value_type = T;

  Array() = default;
  explicit Array(Shape shape, T fill = T(0)) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}
  Array(Shape shape, const std::vector<T>& data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    require(data_.size() == shape_size(shape_),
            "data length " + std::to_string(data_.size()) + " does not match shape " + shape_string(shape_));
  }

  static Array image(int n, int c, int h, int w, T fill = T(0)) { return Array({n, c, h, w}, fill); }

  const Shape& shape() const { return shape_; }
  int dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // NCHW accessors; valid only for rank-4 arrays.
  int batch() const { return shape_[0]; }
  int channels() const { return shape_[1]; }
  int height() const { return shape_[2]; }
  int width() const { return shape_[3]; }
  std::size_t offset(int n, int c, int y, int x) const {
    return ((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x;
  }
  T& at(int n, int c, int y, int x) { return data_[offset(n, c, y, x)]; }
  const T& at(int n, int c, int y, int x) const { return data_[offset(n, c, y, x)]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  template <class U>
  Array<U> cast() const {
    Array<U> out(shape_);
    std::copy(data_.begin(), data_.end(), out.data());
    return out;
  }

  Array& operator+=(const Array& o) {
    require(o.shape_ == shape_, "shape mismatch " + shape_string(shape_) + " vs " + shape_string(o.shape_));
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  friend bool operator==(const Array& a, const Array& b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

 private:
  Shape shape_;
  Buffer<T> data_;
};

template <class T, class F>
Array<T> map(const Array<T>& a, F f) {
  Array<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

template <class T>
double mean(const Array<T>& a) {
  double s = 0.0;
  for (T v : a.values()) s += v;
  return s / static_cast<double>(a.size());
}

/// Copy a single image (batch index b) out of a batch.
template <class T>
Array<T> slice_batch(const Array<T>& a, int b) {
  const std::size_t per = a.size() / a.batch();
  Shape s = a.shape();
  s[0] = 1;
  return Array<T>(s, std::vector<T>(a.data() + b * per, a.data() + (b + 1) * per));
}

/// Stack single images (batch 1 each) into one batch.
template <class T>
Array<T> stack_batch(const std::vector<Array<T>>& items) {
  require(!items.empty(), "stack_batch of empty list");
  Shape s = items.front().shape();
  s[0] = static_cast<int>(items.size());
  Array<T> out(s);
  T* dst = out.data();
  for (const auto& it : items) {
    require(it.shape()[0] == 1 && std::equal(it.shape().begin() + 1, it.shape().end(), s.begin() + 1),
            "stack_batch shape mismatch " + shape_string(it.shape()));
    dst = std::copy(it.values().begin(), it.values().end(), dst);
  }
  return out;
}

}  // namespace n2n
