#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "core/common.hpp"
#include "core/tensor.hpp"

namespace celnet {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<MatRM<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const MatRM<T>>;

// One named trainable array. `decay` marks tensors subject to L2 regularization
// (convolution / dense kernels; never biases or batch-norm scale/shift).
template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* value;
  Tensor<T>* grad;
  bool decay;
};

template <typename T>
class ParamRegistry {
 public:
  void add(const std::string& name, Tensor<T>* value, Tensor<T>* grad, bool decay) {
    params_.push_back(ParamRef<T>{name, value, grad, decay});
  }
  std::vector<ParamRef<T>>& items() { return params_; }
  const std::vector<ParamRef<T>>& items() const { return params_; }

  int64_t total_size() const {
    int64_t n = 0;
    for (const auto& p : params_) n += p.value->size();
    return n;
  }

  void zero_grads() {
    for (auto& p : params_)
      if (p.grad) p.grad->zero();
  }

 private:
  std::vector<ParamRef<T>> params_;
};

// ---------------------------------------------------------------------------
// Convolution, NHWC, square kernel, zero padding of k/2 (output is
// ceil(in/stride)). Weights are stored GEMM-ready as a (k*k*cin) x cout
// row-major matrix whose rows follow (dy, dx, cin) order.

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int k, int cin, int cout, int stride, bool bias)
      : k_(k), cin_(cin), cout_(cout), stride_(stride), has_bias_(bias) {
    CELNET_CHECK_ARG(k >= 1 && k % 2 == 1, "conv kernel size must be odd, got %d", k);
    CELNET_CHECK_ARG(stride >= 1, "conv stride must be >= 1");
    w_.resize(1, 1, int64_t(k) * k * cin, cout);
    gw_.resize(1, 1, int64_t(k) * k * cin, cout);
    if (bias) {
      b_.resize(1, 1, 1, cout);
      gb_.resize(1, 1, 1, cout);
    }
  }

  void init(Rng& rng) {
    // Variance-scaling (fan-in) normal init.
    double fan_in = double(k_) * k_ * cin_;
    double stddev = std::sqrt(2.0 / fan_in);
    for (int64_t i = 0; i < w_.size(); ++i) w_.data()[i] = T(rng.normal() * stddev);
    if (has_bias_) b_.zero();
  }

  void register_params(ParamRegistry<T>& reg, const std::string& prefix) {
    reg.add(prefix + ".w", &w_, &gw_, true);
    if (has_bias_) reg.add(prefix + ".b", &b_, &gb_, false);
  }

  int out_dim(int64_t in) const {
    int p = k_ / 2;
    return int((in + 2 * p - k_) / stride_ + 1);
  }

  void forward(const Tensor<T>& x, Tensor<T>& y) const {
    CELNET_CHECK_ARG(x.c() == cin_, "conv expects %d input channels, got %lld", cin_, (long long)x.c());
    const int64_t oh = out_dim(x.h()), ow = out_dim(x.w());
    y.resize(x.n(), oh, ow, cout_);
    const int64_t cols = int64_t(k_) * k_ * cin_;
    ConstMatMap<T> W(w_.data(), cols, cout_);
    parallel_chunks(x.n(), [&](int, int64_t begin, int64_t end) {
      std::vector<T> col(size_t(oh * ow * cols));
      for (int64_t i = begin; i < end; ++i) {
        im2col(x, i, col.data());
        ConstMatMap<T> C(col.data(), oh * ow, cols);
        MatMap<T> Y(y.image(i), oh * ow, cout_);
        Y.noalias() = C * W;
        if (has_bias_) Y.rowwise() += ConstMatMap<T>(b_.data(), 1, cout_).row(0);
      }
    });
  }

  // Accumulates parameter gradients; writes input gradient when dx != nullptr.
  void backward(const Tensor<T>& x, const Tensor<T>& dy, Tensor<T>* dx) {
    const int64_t oh = dy.h(), ow = dy.w();
    const int64_t cols = int64_t(k_) * k_ * cin_;
    ConstMatMap<T> W(w_.data(), cols, cout_);
    if (dx) {
      dx->resize(x.n(), x.h(), x.w(), x.c());
      dx->zero();
    }
    int workers = worker_count();
    std::vector<std::vector<double>> dw_part(static_cast<size_t>(workers));
    std::vector<std::vector<double>> db_part(static_cast<size_t>(workers));
    parallel_chunks(x.n(), [&](int t, int64_t begin, int64_t end) {
      auto& dw = dw_part[size_t(t)];
      auto& db = db_part[size_t(t)];
      dw.assign(size_t(cols * cout_), 0.0);
      if (has_bias_) db.assign(size_t(cout_), 0.0);
      std::vector<T> col(size_t(oh * ow * cols));
      std::vector<T> dcol(size_t(oh * ow * cols));
      std::vector<T> dwf(size_t(cols * cout_));
      for (int64_t i = begin; i < end; ++i) {
        im2col(x, i, col.data());
        ConstMatMap<T> C(col.data(), oh * ow, cols);
        ConstMatMap<T> DY(dy.image(i), oh * ow, cout_);
        MatMap<T> DW(dwf.data(), cols, cout_);
        DW.noalias() = C.transpose() * DY;
        for (size_t j = 0; j < dw.size(); ++j) dw[j] += double(dwf[j]);
        if (has_bias_) {
          for (int64_t r = 0; r < oh * ow; ++r)
            for (int64_t q = 0; q < cout_; ++q) db[size_t(q)] += double(dy.image(i)[r * cout_ + q]);
        }
        if (dx) {
          MatMap<T> DC(dcol.data(), oh * ow, cols);
          DC.noalias() = DY * W.transpose();
          col2im(dcol.data(), *dx, i);
        }
      }
    });
    // Fixed-order reduction keeps gradient accumulation deterministic.
    for (int t = 0; t < workers; ++t) {
      if (dw_part[size_t(t)].empty()) continue;
      for (int64_t j = 0; j < gw_.size(); ++j) gw_.data()[j] += T(dw_part[size_t(t)][size_t(j)]);
      if (has_bias_)
        for (int64_t q = 0; q < cout_; ++q) gb_.data()[q] += T(db_part[size_t(t)][size_t(q)]);
    }
  }

  Tensor<T>& weight() { return w_; }
  const Tensor<T>& weight() const { return w_; }
  Tensor<T>& bias() { return b_; }
  int kernel() const { return k_; }
  int cin() const { return cin_; }
  int cout() const { return cout_; }
  int64_t param_count() const { return w_.size() + (has_bias_ ? b_.size() : 0); }

 private:
  void im2col(const Tensor<T>& x, int64_t img, T* col) const {
    const int64_t h = x.h(), w = x.w(), c = x.c();
    const int64_t oh = out_dim(h), ow = out_dim(w);
    const int p = k_ / 2;
    const T* src = x.image(img);
    const int64_t cols = int64_t(k_) * k_ * c;
    for (int64_t oy = 0; oy < oh; ++oy) {
      for (int64_t ox = 0; ox < ow; ++ox) {
        T* row = col + (oy * ow + ox) * cols;
        const int64_t iy0 = oy * stride_ - p;
        const int64_t ix0 = ox * stride_ - p;
        for (int dy = 0; dy < k_; ++dy) {
          const int64_t iy = iy0 + dy;
          T* dst = row + int64_t(dy) * k_ * c;
          if (iy < 0 || iy >= h) {
            std::memset(dst, 0, size_t(k_ * c) * sizeof(T));
            continue;
          }
          for (int dxk = 0; dxk < k_; ++dxk) {
            const int64_t ix = ix0 + dxk;
            if (ix < 0 || ix >= w) {
              std::memset(dst + int64_t(dxk) * c, 0, size_t(c) * sizeof(T));
            } else {
              std::memcpy(dst + int64_t(dxk) * c, src + (iy * w + ix) * c, size_t(c) * sizeof(T));
            }
          }
        }
      }
    }
  }

  void col2im(const T* dcol, Tensor<T>& dx, int64_t img) const {
    const int64_t h = dx.h(), w = dx.w(), c = dx.c();
    const int64_t oh = out_dim(h), ow = out_dim(w);
    const int p = k_ / 2;
    T* dst_img = dx.image(img);
    const int64_t cols = int64_t(k_) * k_ * c;
    for (int64_t oy = 0; oy < oh; ++oy) {
      for (int64_t ox = 0; ox < ow; ++ox) {
        const T* row = dcol + (oy * ow + ox) * cols;
        const int64_t iy0 = oy * stride_ - p;
        const int64_t ix0 = ox * stride_ - p;
        for (int dy = 0; dy < k_; ++dy) {
          const int64_t iy = iy0 + dy;
          if (iy < 0 || iy >= h) continue;
          for (int dxk = 0; dxk < k_; ++dxk) {
            const int64_t ix = ix0 + dxk;
            if (ix < 0 || ix >= w) continue;
            const T* s = row + (int64_t(dy) * k_ + dxk) * c;
            T* d = dst_img + (iy * w + ix) * c;
            for (int64_t q = 0; q < c; ++q) d[q] += s[q];
          }
        }
      }
    }
  }

  int k_ = 0, cin_ = 0, cout_ = 0, stride_ = 1;
  bool has_bias_ = false;
  Tensor<T> w_, gw_, b_, gb_;
};

// ---------------------------------------------------------------------------
// Batch normalization over (N,H,W) per channel.

template <typename T>
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  explicit BatchNorm2d(int c, double momentum = 0.1, double eps = 1e-5)
      : c_(c), momentum_(momentum), eps_(eps) {
    gamma_.resize(1, 1, 1, c);
    beta_.resize(1, 1, 1, c);
    ggamma_.resize(1, 1, 1, c);
    gbeta_.resize(1, 1, 1, c);
    running_mean_.resize(1, 1, 1, c);
    running_var_.resize(1, 1, 1, c);
    gamma_.fill(T(1));
    running_var_.fill(T(1));
  }

  void register_params(ParamRegistry<T>& reg, const std::string& prefix) {
    reg.add(prefix + ".gamma", &gamma_, &ggamma_, false);
    reg.add(prefix + ".beta", &beta_, &gbeta_, false);
  }

  Tensor<T>& running_mean() { return running_mean_; }
  Tensor<T>& running_var() { return running_var_; }

  void forward(const Tensor<T>& x, Tensor<T>& y, bool train) {
    CELNET_CHECK_ARG(x.c() == c_, "batchnorm channel mismatch");
    y.resize(x.n(), x.h(), x.w(), x.c());
    const int64_t m = x.n() * x.h() * x.w();
    mean_.assign(size_t(c_), 0.0);
    invstd_.assign(size_t(c_), 0.0);
    if (train) {
      CELNET_CHECK_ARG(m > 0, "batchnorm on empty batch");
      std::vector<double> sum(size_t(c_), 0.0), sumsq(size_t(c_), 0.0);
      const T* p = x.data();
      for (int64_t i = 0; i < m; ++i)
        for (int64_t q = 0; q < c_; ++q) {
          double v = double(p[i * c_ + q]);
          sum[size_t(q)] += v;
          sumsq[size_t(q)] += v * v;
        }
      for (int64_t q = 0; q < c_; ++q) {
        double mu = sum[size_t(q)] / double(m);
        double var = std::max(0.0, sumsq[size_t(q)] / double(m) - mu * mu);
        mean_[size_t(q)] = mu;
        invstd_[size_t(q)] = 1.0 / std::sqrt(var + eps_);
        running_mean_.data()[q] = T((1.0 - momentum_) * double(running_mean_.data()[q]) + momentum_ * mu);
        running_var_.data()[q] = T((1.0 - momentum_) * double(running_var_.data()[q]) + momentum_ * var);
      }
    } else {
      for (int64_t q = 0; q < c_; ++q) {
        mean_[size_t(q)] = double(running_mean_.data()[q]);
        invstd_[size_t(q)] = 1.0 / std::sqrt(double(running_var_.data()[q]) + eps_);
      }
    }
    train_pass_ = train;
    const T* px = x.data();
    T* py = y.data();
    parallel_chunks(m, [&](int, int64_t begin, int64_t end) {
      for (int64_t i = begin; i < end; ++i)
        for (int64_t q = 0; q < c_; ++q) {
          double xhat = (double(px[i * c_ + q]) - mean_[size_t(q)]) * invstd_[size_t(q)];
          py[i * c_ + q] = T(xhat * double(gamma_.data()[q]) + double(beta_.data()[q]));
        }
    });
  }

  void backward(const Tensor<T>& x, const Tensor<T>& dy, Tensor<T>* dx) {
    const int64_t m = x.n() * x.h() * x.w();
    std::vector<double> sum_dy(size_t(c_), 0.0), sum_dy_xhat(size_t(c_), 0.0);
    const T* px = x.data();
    const T* pdy = dy.data();
    for (int64_t i = 0; i < m; ++i)
      for (int64_t q = 0; q < c_; ++q) {
        double xhat = (double(px[i * c_ + q]) - mean_[size_t(q)]) * invstd_[size_t(q)];
        sum_dy[size_t(q)] += double(pdy[i * c_ + q]);
        sum_dy_xhat[size_t(q)] += double(pdy[i * c_ + q]) * xhat;
      }
    for (int64_t q = 0; q < c_; ++q) {
      ggamma_.data()[q] += T(sum_dy_xhat[size_t(q)]);
      gbeta_.data()[q] += T(sum_dy[size_t(q)]);
    }
    if (!dx) return;
    dx->resize(x.n(), x.h(), x.w(), x.c());
    T* pdx = dx->data();
    if (train_pass_) {
      parallel_chunks(m, [&](int, int64_t begin, int64_t end) {
        for (int64_t i = begin; i < end; ++i)
          for (int64_t q = 0; q < c_; ++q) {
            double xhat = (double(px[i * c_ + q]) - mean_[size_t(q)]) * invstd_[size_t(q)];
            double g = double(gamma_.data()[q]) * invstd_[size_t(q)];
            pdx[i * c_ + q] = T(g * (double(pdy[i * c_ + q]) - sum_dy[size_t(q)] / double(m) -
                                     xhat * sum_dy_xhat[size_t(q)] / double(m)));
          }
      });
    } else {
      // Eval-mode stats are constants, so the map is affine per channel.
      parallel_chunks(m, [&](int, int64_t begin, int64_t end) {
        for (int64_t i = begin; i < end; ++i)
          for (int64_t q = 0; q < c_; ++q)
            pdx[i * c_ + q] = T(double(pdy[i * c_ + q]) * double(gamma_.data()[q]) * invstd_[size_t(q)]);
      });
    }
  }

  int64_t param_count() const { return gamma_.size() + beta_.size(); }

 private:
  int c_ = 0;
  double momentum_ = 0.1, eps_ = 1e-5;
  bool train_pass_ = false;
  Tensor<T> gamma_, beta_, ggamma_, gbeta_;
  Tensor<T> running_mean_, running_var_;
  std::vector<double> mean_, invstd_;
};

// ---------------------------------------------------------------------------
// Activations.

template <typename T>
void relu_forward(const Tensor<T>& x, Tensor<T>& y) {
  y.resize(x.n(), x.h(), x.w(), x.c());
  const T* px = x.data();
  T* py = y.data();
  for (int64_t i = 0; i < x.size(); ++i) py[i] = px[i] > T(0) ? px[i] : T(0);
}

template <typename T>
void relu_forward_inplace(Tensor<T>& x) {
  T* p = x.data();
  for (int64_t i = 0; i < x.size(); ++i)
    if (p[i] < T(0)) p[i] = T(0);
}

// `y` is the rectifier output. Guided mode additionally zeroes entries whose
// incoming gradient is negative (Springenberg et al. rule).
template <typename T>
void relu_backward(const Tensor<T>& y, const Tensor<T>& dy, Tensor<T>& dx, bool guided) {
  dx.resize(y.n(), y.h(), y.w(), y.c());
  const T* py = y.data();
  const T* pdy = dy.data();
  T* pdx = dx.data();
  for (int64_t i = 0; i < y.size(); ++i) {
    T g = py[i] > T(0) ? pdy[i] : T(0);
    if (guided && g < T(0)) g = T(0);
    pdx[i] = g;
  }
}

template <typename T>
inline T sigmoid(T x) {
  return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
}

template <typename T>
void sigmoid_forward(const Tensor<T>& x, Tensor<T>& y) {
  y.resize(x.n(), x.h(), x.w(), x.c());
  for (int64_t i = 0; i < x.size(); ++i) y.data()[i] = sigmoid(x.data()[i]);
}

// ---------------------------------------------------------------------------
// Window pooling. Window == feature size gives plain GAP / GMP; smaller
// windows give the sliding-window grids used for spatial logit maps.

template <typename T>
class AvgPoolWin {
 public:
  // Grid defaults to the natural (size - win) / stride + 1; an explicit grid
  // may be smaller (keeps companion-head grids aligned across layers).
  void forward(const Tensor<T>& x, int win, int stride, Tensor<T>& y, int64_t gh = -1,
               int64_t gw = -1) {
    CELNET_CHECK_ARG(x.h() >= win && x.w() >= win, "pool window %d exceeds feature map %lldx%lld",
                     win, (long long)x.h(), (long long)x.w());
    win_ = win;
    stride_ = stride;
    if (gh < 0) gh = (x.h() - win) / stride + 1;
    if (gw < 0) gw = (x.w() - win) / stride + 1;
    CELNET_CHECK_ARG((gh - 1) * stride + win <= x.h() && (gw - 1) * stride + win <= x.w(),
                     "pool grid out of range");
    y.resize(x.n(), gh, gw, x.c());
    const double inv = 1.0 / (double(win) * win);
    parallel_chunks(x.n(), [&](int, int64_t b, int64_t e) {
      for (int64_t i = b; i < e; ++i)
        for (int64_t gy = 0; gy < gh; ++gy)
          for (int64_t gx = 0; gx < gw; ++gx)
            for (int64_t q = 0; q < x.c(); ++q) {
              double acc = 0.0;
              for (int dy = 0; dy < win; ++dy)
                for (int dx = 0; dx < win; ++dx)
                  acc += double(x.at(i, gy * stride + dy, gx * stride + dx, q));
              y.at(i, gy, gx, q) = T(acc * inv);
            }
    });
  }

  void backward(const Tensor<T>& x, const Tensor<T>& dy, Tensor<T>& dx) const {
    dx.resize(x.n(), x.h(), x.w(), x.c());
    dx.zero();
    const T inv = T(1.0 / (double(win_) * win_));
    for (int64_t i = 0; i < x.n(); ++i)
      for (int64_t gy = 0; gy < dy.h(); ++gy)
        for (int64_t gx = 0; gx < dy.w(); ++gx)
          for (int64_t q = 0; q < x.c(); ++q) {
            T g = dy.at(i, gy, gx, q) * inv;
            for (int d = 0; d < win_; ++d)
              for (int dxk = 0; dxk < win_; ++dxk)
                dx.at(i, gy * stride_ + d, gx * stride_ + dxk, q) += g;
          }
  }

 private:
  int win_ = 0, stride_ = 0;
};

template <typename T>
class MaxPoolWin {
 public:
  void forward(const Tensor<T>& x, int win, int stride, Tensor<T>& y, int64_t gh = -1,
               int64_t gw = -1) {
    CELNET_CHECK_ARG(x.h() >= win && x.w() >= win, "pool window %d exceeds feature map %lldx%lld",
                     win, (long long)x.h(), (long long)x.w());
    win_ = win;
    stride_ = stride;
    if (gh < 0) gh = (x.h() - win) / stride + 1;
    if (gw < 0) gw = (x.w() - win) / stride + 1;
    CELNET_CHECK_ARG((gh - 1) * stride + win <= x.h() && (gw - 1) * stride + win <= x.w(),
                     "pool grid out of range");
    y.resize(x.n(), gh, gw, x.c());
    argmax_.assign(size_t(y.size()), 0);
    parallel_chunks(x.n(), [&](int, int64_t b, int64_t e) {
      for (int64_t i = b; i < e; ++i)
        for (int64_t gy = 0; gy < gh; ++gy)
          for (int64_t gx = 0; gx < gw; ++gx)
            for (int64_t q = 0; q < x.c(); ++q) {
              T best = x.at(i, gy * stride, gx * stride, q);
              int64_t best_idx = ((i * x.h() + gy * stride) * x.w() + gx * stride) * x.c() + q;
              for (int dy = 0; dy < win; ++dy)
                for (int dx = 0; dx < win; ++dx) {
                  T v = x.at(i, gy * stride + dy, gx * stride + dx, q);
                  if (v > best) {
                    best = v;
                    best_idx = ((i * x.h() + gy * stride + dy) * x.w() + gx * stride + dx) * x.c() + q;
                  }
                }
              y.at(i, gy, gx, q) = best;
              argmax_[size_t(((i * gh + gy) * gw + gx) * x.c() + q)] = best_idx;
            }
    });
  }

  void backward(const Tensor<T>& x, const Tensor<T>& dy, Tensor<T>& dx) const {
    dx.resize(x.n(), x.h(), x.w(), x.c());
    dx.zero();
    for (int64_t j = 0; j < dy.size(); ++j) dx.data()[argmax_[size_t(j)]] += dy.data()[j];
  }

 private:
  int win_ = 0, stride_ = 0;
  std::vector<int64_t> argmax_;
};

// ---------------------------------------------------------------------------
// Dense layer on per-image channel vectors, shapes (N,1,1,C) -> (N,1,1,C').

template <typename T>
class Dense {
 public:
  Dense() = default;
  Dense(int cin, int cout) : cin_(cin), cout_(cout) {
    w_.resize(1, 1, cin, cout);
    gw_.resize(1, 1, cin, cout);
    b_.resize(1, 1, 1, cout);
    gb_.resize(1, 1, 1, cout);
  }

  void init(Rng& rng) {
    double stddev = std::sqrt(2.0 / double(cin_));
    for (int64_t i = 0; i < w_.size(); ++i) w_.data()[i] = T(rng.normal() * stddev);
    b_.zero();
  }

  void register_params(ParamRegistry<T>& reg, const std::string& prefix) {
    reg.add(prefix + ".w", &w_, &gw_, true);
    reg.add(prefix + ".b", &b_, &gb_, false);
  }

  void forward(const Tensor<T>& x, Tensor<T>& y) const {
    CELNET_CHECK_ARG(x.h() == 1 && x.w() == 1 && x.c() == cin_, "dense input shape mismatch");
    y.resize(x.n(), 1, 1, cout_);
    ConstMatMap<T> X(x.data(), x.n(), cin_);
    ConstMatMap<T> W(w_.data(), cin_, cout_);
    MatMap<T> Y(y.data(), x.n(), cout_);
    Y.noalias() = X * W;
    Y.rowwise() += ConstMatMap<T>(b_.data(), 1, cout_).row(0);
  }

  void backward(const Tensor<T>& x, const Tensor<T>& dy, Tensor<T>* dx) {
    ConstMatMap<T> X(x.data(), x.n(), cin_);
    ConstMatMap<T> DY(dy.data(), dy.n(), cout_);
    MatMap<T> GW(gw_.data(), cin_, cout_);
    GW.noalias() += X.transpose() * DY;
    for (int64_t i = 0; i < dy.n(); ++i)
      for (int64_t q = 0; q < cout_; ++q) gb_.data()[q] += dy.data()[i * cout_ + q];
    if (dx) {
      dx->resize(x.n(), 1, 1, cin_);
      ConstMatMap<T> W(w_.data(), cin_, cout_);
      MatMap<T> DX(dx->data(), x.n(), cin_);
      DX.noalias() = DY * W.transpose();
    }
  }

  int64_t param_count() const { return w_.size() + b_.size(); }
  Tensor<T>& weight() { return w_; }
  Tensor<T>& bias() { return b_; }

 private:
  int cin_ = 0, cout_ = 0;
  Tensor<T> w_, gw_, b_, gb_;
};

// ---------------------------------------------------------------------------
// Channel concat helpers.

template <typename T>
void concat_channels(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& y) {
  CELNET_CHECK_ARG(a.n() == b.n() && a.h() == b.h() && a.w() == b.w(),
                   "concat requires equal N,H,W");
  y.resize(a.n(), a.h(), a.w(), a.c() + b.c());
  const int64_t m = a.n() * a.h() * a.w();
  for (int64_t i = 0; i < m; ++i) {
    std::memcpy(y.data() + i * y.c(), a.data() + i * a.c(), size_t(a.c()) * sizeof(T));
    std::memcpy(y.data() + i * y.c() + a.c(), b.data() + i * b.c(), size_t(b.c()) * sizeof(T));
  }
}

template <typename T>
void split_channels(const Tensor<T>& dy, Tensor<T>& da, Tensor<T>& db, int64_t ca) {
  const int64_t cb = dy.c() - ca;
  da.resize(dy.n(), dy.h(), dy.w(), ca);
  db.resize(dy.n(), dy.h(), dy.w(), cb);
  const int64_t m = dy.n() * dy.h() * dy.w();
  for (int64_t i = 0; i < m; ++i) {
    std::memcpy(da.data() + i * ca, dy.data() + i * dy.c(), size_t(ca) * sizeof(T));
    std::memcpy(db.data() + i * cb, dy.data() + i * dy.c() + ca, size_t(cb) * sizeof(T));
  }
}

}  // namespace celnet
