#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <vector>

#include "core/common.hpp"

namespace celnet {

// Dense NHWC tensor. Rank-4 throughout; vectors are modeled as 1x1x1xC and
// per-image maps as 1xHxWx1 where convenient.
template <typename T>
class Tensor {
 public:
  Tensor() : n_(0), h_(0), w_(0), c_(0) {}
  Tensor(int64_t n, int64_t h, int64_t w, int64_t c) { resize(n, h, w, c); }

  void resize(int64_t n, int64_t h, int64_t w, int64_t c) {
    CELNET_CHECK_ARG(n >= 0 && h >= 0 && w >= 0 && c >= 0, "negative tensor dimension");
    n_ = n; h_ = h; w_ = w; c_ = c;
    data_.assign(size_t(n * h * w * c), T(0));
  }

  int64_t n() const { return n_; }
  int64_t h() const { return h_; }
  int64_t w() const { return w_; }
  int64_t c() const { return c_; }
  int64_t size() const { return int64_t(data_.size()); }
  bool empty() const { return data_.empty(); }

  bool same_shape(const Tensor& o) const {
    return n_ == o.n_ && h_ == o.h_ && w_ == o.w_ && c_ == o.c_;
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& at(int64_t n, int64_t y, int64_t x, int64_t ch) {
    return data_[size_t(((n * h_ + y) * w_ + x) * c_ + ch)];
  }
  T at(int64_t n, int64_t y, int64_t x, int64_t ch) const {
    return data_[size_t(((n * h_ + y) * w_ + x) * c_ + ch)];
  }

  T* image(int64_t n) { return data_.data() + n * h_ * w_ * c_; }
  const T* image(int64_t n) const { return data_.data() + n * h_ * w_ * c_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  void zero() { fill(T(0)); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(n_, h_, w_, c_);
    for (int64_t i = 0; i < size(); ++i) out.data()[i] = U(data_[i]);
    return out;
  }

  std::array<int64_t, 4> shape() const { return {n_, h_, w_, c_}; }

 private:
  int64_t n_, h_, w_, c_;
  std::vector<T> data_;
};

template <typename T>
double sum_squares(const Tensor<T>& t) {
  double acc = 0.0;
  const T* p = t.data();
  for (int64_t i = 0; i < t.size(); ++i) acc += double(p[i]) * double(p[i]);
  return acc;
}

template <typename T>
T max_value(const Tensor<T>& t) {
  CELNET_CHECK_ARG(!t.empty(), "max of empty tensor");
  return *std::max_element(t.data(), t.data() + t.size());
}

}  // namespace celnet
