#pragma once

#include <vector>

#include "core/nn.hpp"

namespace celnet {

// Squeeze-and-excitation style channel gate: GAP and GMP descriptors through a
// shared two-layer bottleneck, summed, sigmoided, applied as a per-channel
// multiplier.
template <typename T>
class ChannelAttention {
 public:
  ChannelAttention() = default;
  ChannelAttention(int c, int reduction) : c_(c), reduction_(reduction) {
    CELNET_CHECK_ARG(c >= reduction, "channel attention requires c >= reduction ratio (%d < %d)",
                     c, reduction);
    hidden_ = c / reduction;
    fc1_ = Dense<T>(c, hidden_);
    fc2_ = Dense<T>(hidden_, c);
  }

  void init(Rng& rng) {
    fc1_.init(rng);
    fc2_.init(rng);
  }

  void register_params(ParamRegistry<T>& reg, const std::string& prefix) {
    fc1_.register_params(reg, prefix + ".fc1");
    fc2_.register_params(reg, prefix + ".fc2");
  }

  const Tensor<T>& forward(const Tensor<T>& x) {
    const int64_t n = x.n(), hw = x.h() * x.w();
    avg_.resize(n, 1, 1, c_);
    max_.resize(n, 1, 1, c_);
    argmax_.assign(size_t(n * c_), 0);
    for (int64_t i = 0; i < n; ++i) {
      const T* img = x.image(i);
      for (int64_t q = 0; q < c_; ++q) {
        double acc = 0.0;
        T best = img[q];
        int64_t best_at = 0;
        for (int64_t p = 0; p < hw; ++p) {
          T v = img[p * c_ + q];
          acc += double(v);
          if (v > best) {
            best = v;
            best_at = p;
          }
        }
        avg_.at(i, 0, 0, q) = T(acc / double(hw));
        max_.at(i, 0, 0, q) = best;
        argmax_[size_t(i * c_ + q)] = best_at;
      }
    }
    fc1_.forward(avg_, h_avg_);
    relu_forward(h_avg_, h_avg_r_);
    fc2_.forward(h_avg_r_, z_avg_);
    fc1_.forward(max_, h_max_);
    relu_forward(h_max_, h_max_r_);
    fc2_.forward(h_max_r_, z_max_);
    gate_.resize(n, 1, 1, c_);
    for (int64_t i = 0; i < gate_.size(); ++i)
      gate_.data()[i] = sigmoid(z_avg_.data()[i] + z_max_.data()[i]);
    y_.resize(x.n(), x.h(), x.w(), x.c());
    parallel_chunks(n, [&](int, int64_t b, int64_t e) {
      for (int64_t i = b; i < e; ++i) {
        const T* img = x.image(i);
        const T* g = gate_.image(i);
        T* out = y_.image(i);
        for (int64_t p = 0; p < hw; ++p)
          for (int64_t q = 0; q < c_; ++q) out[p * c_ + q] = img[p * c_ + q] * g[q];
      }
    });
    return y_;
  }

  void backward(const Tensor<T>& x, const Tensor<T>& dy, Tensor<T>& dx, bool guided) {
    const int64_t n = x.n(), hw = x.h() * x.w();
    dx.resize(x.n(), x.h(), x.w(), x.c());
    Tensor<T> dgate(n, 1, 1, c_);
    parallel_chunks(n, [&](int, int64_t b, int64_t e) {
      for (int64_t i = b; i < e; ++i) {
        const T* img = x.image(i);
        const T* g = gate_.image(i);
        const T* pdy = dy.image(i);
        T* pdx = dx.image(i);
        for (int64_t q = 0; q < c_; ++q) {
          double acc = 0.0;
          for (int64_t p = 0; p < hw; ++p) {
            pdx[p * c_ + q] = pdy[p * c_ + q] * g[q];
            acc += double(pdy[p * c_ + q]) * double(img[p * c_ + q]);
          }
          dgate.at(i, 0, 0, q) = T(acc);
        }
      }
    });
    // Through the sigmoid of the summed bottleneck outputs.
    Tensor<T> dz(n, 1, 1, c_);
    for (int64_t i = 0; i < dz.size(); ++i) {
      T g = gate_.data()[i];
      dz.data()[i] = dgate.data()[i] * g * (T(1) - g);
    }
    Tensor<T> dh_r, dh, dvec;
    // Average path.
    fc2_.backward(h_avg_r_, dz, &dh_r);
    relu_backward(h_avg_r_, dh_r, dh, guided);
    fc1_.backward(avg_, dh, &dvec);
    for (int64_t i = 0; i < n; ++i) {
      T* pdx = dx.image(i);
      const T* dv = dvec.image(i);
      for (int64_t q = 0; q < c_; ++q) {
        T add = dv[q] / T(double(hw));
        for (int64_t p = 0; p < hw; ++p) pdx[p * c_ + q] += add;
      }
    }
    // Max path.
    fc2_.backward(h_max_r_, dz, &dh_r);
    relu_backward(h_max_r_, dh_r, dh, guided);
    fc1_.backward(max_, dh, &dvec);
    for (int64_t i = 0; i < n; ++i) {
      T* pdx = dx.image(i);
      const T* dv = dvec.image(i);
      for (int64_t q = 0; q < c_; ++q) pdx[argmax_[size_t(i * c_ + q)] * c_ + q] += dv[q];
    }
  }

  const Tensor<T>& gate() const { return gate_; }
  Tensor<T>& fc2_bias() { return fc2_.bias(); }
  int64_t param_count() const { return fc1_.param_count() + fc2_.param_count(); }

 private:
  int c_ = 0, reduction_ = 8, hidden_ = 0;
  Dense<T> fc1_, fc2_;
  Tensor<T> avg_, max_, h_avg_, h_avg_r_, z_avg_, h_max_, h_max_r_, z_max_, gate_, y_;
  std::vector<int64_t> argmax_;
};

enum class SpatialBranchInput {
  // Branch convolutions read a 2-channel descriptor (channel-wise mean and
  // max of the squeezed map). Matches the reported parameter budget.
  pooled,
  // Branch convolutions read the full squeezed map.
  all,
};

// Multi-branch spatial attention: per-branch k'xk' convolutions to one
// channel, summed, sigmoided.
template <typename T>
class SpatialAttention {
 public:
  SpatialAttention() = default;
  SpatialAttention(int c, const std::vector<int>& kernel_sizes, SpatialBranchInput input_mode)
      : c_(c), mode_(input_mode) {
    CELNET_CHECK_ARG(!kernel_sizes.empty(), "spatial attention needs at least one branch");
    int cin = mode_ == SpatialBranchInput::pooled ? 2 : c;
    for (int k : kernel_sizes) {
      CELNET_CHECK_ARG(k % 2 == 1, "spatial attention kernel size must be odd, got %d", k);
      branches_.emplace_back(k, cin, 1, 1, true);
    }
  }

  void init(Rng& rng) {
    for (auto& b : branches_) b.init(rng);
  }

  void register_params(ParamRegistry<T>& reg, const std::string& prefix) {
    for (size_t i = 0; i < branches_.size(); ++i)
      branches_[i].register_params(reg, prefix + ".k" + std::to_string(branches_[i].kernel()));
  }

  // Returns the attention map (N,H,W,1), values in (0,1).
  const Tensor<T>& forward(const Tensor<T>& x) {
    CELNET_CHECK_ARG(x.c() == c_, "spatial attention channel mismatch");
    make_descriptor(x);
    pre_.resize(x.n(), x.h(), x.w(), 1);
    pre_.zero();
    Tensor<T> branch_out;
    for (auto& b : branches_) {
      b.forward(desc_, branch_out);
      for (int64_t i = 0; i < pre_.size(); ++i) pre_.data()[i] += branch_out.data()[i];
    }
    sigmoid_forward(pre_, map_);
    return map_;
  }

  // dmap -> gradient w.r.t. the squeezed input map.
  void backward(const Tensor<T>& x, const Tensor<T>& dmap, Tensor<T>& dx) {
    Tensor<T> dpre(dmap.n(), dmap.h(), dmap.w(), 1);
    for (int64_t i = 0; i < dpre.size(); ++i) {
      T a = map_.data()[i];
      dpre.data()[i] = dmap.data()[i] * a * (T(1) - a);
    }
    Tensor<T> ddesc(desc_.n(), desc_.h(), desc_.w(), desc_.c());
    ddesc.zero();
    Tensor<T> ddesc_one;
    for (auto& b : branches_) {
      b.backward(desc_, dpre, &ddesc_one);
      for (int64_t i = 0; i < ddesc.size(); ++i) ddesc.data()[i] += ddesc_one.data()[i];
    }
    dx.resize(x.n(), x.h(), x.w(), x.c());
    if (mode_ == SpatialBranchInput::all) {
      dx = ddesc;
      return;
    }
    dx.zero();
    const int64_t m = x.n() * x.h() * x.w();
    const T invc = T(1.0 / double(c_));
    for (int64_t p = 0; p < m; ++p) {
      T davg = ddesc.data()[p * 2 + 0] * invc;
      for (int64_t q = 0; q < c_; ++q) dx.data()[p * c_ + q] += davg;
      dx.data()[p * c_ + argmax_c_[size_t(p)]] += ddesc.data()[p * 2 + 1];
    }
  }

  const Tensor<T>& map() const { return map_; }
  std::vector<Conv2d<T>>& branches() { return branches_; }
  int64_t param_count() const {
    int64_t n = 0;
    for (const auto& b : branches_) n += b.param_count();
    return n;
  }

 private:
  void make_descriptor(const Tensor<T>& x) {
    if (mode_ == SpatialBranchInput::all) {
      desc_ = x;
      return;
    }
    const int64_t m = x.n() * x.h() * x.w();
    desc_.resize(x.n(), x.h(), x.w(), 2);
    argmax_c_.assign(size_t(m), 0);
    for (int64_t p = 0; p < m; ++p) {
      const T* px = x.data() + p * c_;
      double acc = 0.0;
      T best = px[0];
      int64_t best_q = 0;
      for (int64_t q = 0; q < c_; ++q) {
        acc += double(px[q]);
        if (px[q] > best) {
          best = px[q];
          best_q = q;
        }
      }
      desc_.data()[p * 2 + 0] = T(acc / double(c_));
      desc_.data()[p * 2 + 1] = best;
      argmax_c_[size_t(p)] = best_q;
    }
  }

  int c_ = 0;
  SpatialBranchInput mode_ = SpatialBranchInput::pooled;
  std::vector<Conv2d<T>> branches_;
  Tensor<T> desc_, pre_, map_;
  std::vector<int64_t> argmax_c_;
};

// MAM: channel gate then spatial gate, elementwise.
template <typename T>
class Mam {
 public:
  Mam() = default;
  Mam(int c, int reduction, const std::vector<int>& kernel_sizes, SpatialBranchInput input_mode)
      : ca_(c, reduction), sa_(c, kernel_sizes, input_mode) {}

  void init(Rng& rng) {
    ca_.init(rng);
    sa_.init(rng);
  }

  void register_params(ParamRegistry<T>& reg, const std::string& prefix) {
    ca_.register_params(reg, prefix + ".ca");
    sa_.register_params(reg, prefix + ".sa");
  }

  const Tensor<T>& forward(const Tensor<T>& x) {
    squeezed_ = &ca_.forward(x);
    const Tensor<T>& a = sa_.forward(*squeezed_);
    y_.resize(x.n(), x.h(), x.w(), x.c());
    const int64_t m = x.n() * x.h() * x.w(), c = x.c();
    for (int64_t p = 0; p < m; ++p) {
      T g = a.data()[p];
      for (int64_t q = 0; q < c; ++q) y_.data()[p * c + q] = squeezed_->data()[p * c + q] * g;
    }
    return y_;
  }

  void backward(const Tensor<T>& x, const Tensor<T>& dy, Tensor<T>& dx, bool guided) {
    CELNET_CHECK_STATE(squeezed_ != nullptr, "mam backward before forward");
    const int64_t m = x.n() * x.h() * x.w(), c = x.c();
    const Tensor<T>& a = sa_.map();
    Tensor<T> dsq(x.n(), x.h(), x.w(), x.c());
    Tensor<T> dmap(x.n(), x.h(), x.w(), 1);
    for (int64_t p = 0; p < m; ++p) {
      T g = a.data()[p];
      double acc = 0.0;
      for (int64_t q = 0; q < c; ++q) {
        dsq.data()[p * c + q] = dy.data()[p * c + q] * g;
        acc += double(dy.data()[p * c + q]) * double(squeezed_->data()[p * c + q]);
      }
      dmap.data()[p] = T(acc);
    }
    Tensor<T> dsq_from_sa;
    sa_.backward(*squeezed_, dmap, dsq_from_sa);
    for (int64_t i = 0; i < dsq.size(); ++i) dsq.data()[i] += dsq_from_sa.data()[i];
    ca_.backward(x, dsq, dx, guided);
  }

  ChannelAttention<T>& channel() { return ca_; }
  SpatialAttention<T>& spatial() { return sa_; }
  int64_t param_count() const { return ca_.param_count() + sa_.param_count(); }

 private:
  ChannelAttention<T> ca_;
  SpatialAttention<T> sa_;
  const Tensor<T>* squeezed_ = nullptr;  // owned by ca_, valid until its next forward
  Tensor<T> y_;
};

}  // namespace celnet
