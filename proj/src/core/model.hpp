#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "core/attention.hpp"
#include "core/hdf5_util.hpp"
#include "core/nn.hpp"

namespace celnet {

using json = nlohmann::json;

struct CelnetConfig {
  int input_size = 96;
  std::vector<int> module_channels = {16, 32, 64};
  int blocks_per_module = 3;
  std::vector<int> attention_kernel_sizes = {3, 5, 7};
  int head_channels = 16;
  int reduction_ratio = 8;
  bool use_mam = true;
  // "pooled": branches read channel-wise mean/max descriptors (2 channels).
  // "all": branches read the full squeezed map; larger parameter footprint.
  std::string spatial_branch_input = "pooled";
  // Window stride, in input pixels, of the sliding logit grid produced for
  // inputs larger than input_size.
  int eval_stride_px = 32;

  void validate() const {
    CELNET_CHECK_ARG(input_size >= 8 && input_size % 4 == 0,
                     "input_size must be a multiple of 4 and >= 8, got %d", input_size);
    CELNET_CHECK_ARG(module_channels.size() == 3, "module_channels must have 3 entries");
    for (size_t i = 1; i < module_channels.size(); ++i)
      CELNET_CHECK_ARG(module_channels[i] > module_channels[i - 1],
                       "module_channels must be strictly increasing");
    CELNET_CHECK_ARG(blocks_per_module >= 1, "blocks_per_module must be >= 1");
    CELNET_CHECK_ARG(head_channels >= 1, "head_channels must be >= 1");
    for (int k : attention_kernel_sizes)
      CELNET_CHECK_ARG(k >= 3 && k % 2 == 1, "attention kernel sizes must be odd and >= 3, got %d", k);
    CELNET_CHECK_ARG(!attention_kernel_sizes.empty(), "attention_kernel_sizes must be nonempty");
    CELNET_CHECK_ARG(reduction_ratio >= 1, "reduction_ratio must be >= 1");
    CELNET_CHECK_ARG(spatial_branch_input == "pooled" || spatial_branch_input == "all",
                     "spatial_branch_input must be 'pooled' or 'all'");
    CELNET_CHECK_ARG(eval_stride_px >= 4 && eval_stride_px % 4 == 0,
                     "eval_stride_px must be a positive multiple of 4");
  }

  SpatialBranchInput branch_input() const {
    return spatial_branch_input == "all" ? SpatialBranchInput::all : SpatialBranchInput::pooled;
  }
};

inline void to_json(json& j, const CelnetConfig& c) {
  j = json{{"input_size", c.input_size},
           {"module_channels", c.module_channels},
           {"blocks_per_module", c.blocks_per_module},
           {"attention_kernel_sizes", c.attention_kernel_sizes},
           {"head_channels", c.head_channels},
           {"reduction_ratio", c.reduction_ratio},
           {"use_mam", c.use_mam},
           {"spatial_branch_input", c.spatial_branch_input},
           {"eval_stride_px", c.eval_stride_px}};
}

inline void from_json(const json& j, CelnetConfig& c) {
  c = CelnetConfig{};
  if (j.contains("input_size")) j.at("input_size").get_to(c.input_size);
  if (j.contains("module_channels")) j.at("module_channels").get_to(c.module_channels);
  if (j.contains("blocks_per_module")) j.at("blocks_per_module").get_to(c.blocks_per_module);
  if (j.contains("attention_kernel_sizes")) j.at("attention_kernel_sizes").get_to(c.attention_kernel_sizes);
  if (j.contains("head_channels")) j.at("head_channels").get_to(c.head_channels);
  if (j.contains("reduction_ratio")) j.at("reduction_ratio").get_to(c.reduction_ratio);
  if (j.contains("use_mam")) j.at("use_mam").get_to(c.use_mam);
  if (j.contains("spatial_branch_input")) j.at("spatial_branch_input").get_to(c.spatial_branch_input);
  if (j.contains("eval_stride_px")) j.at("eval_stride_px").get_to(c.eval_stride_px);
}

enum class BackpropMode { standard, guided };
enum class GradTarget { input, f2, f3 };

// Residual building block: conv-bn-relu, conv-bn, MAM refinement, shortcut
// add, relu. Downsampling blocks use a 3x3 stride-2 convolution on both the
// main path and the shortcut.
template <typename T>
class ResBlock {
 public:
  ResBlock() = default;
  ResBlock(int cin, int cout, int stride, const CelnetConfig& cfg)
      : projection_(stride != 1 || cin != cout) {
    conv1_ = Conv2d<T>(3, cin, cout, stride, false);
    bn1_ = BatchNorm2d<T>(cout);
    conv2_ = Conv2d<T>(3, cout, cout, 1, false);
    bn2_ = BatchNorm2d<T>(cout);
    if (cfg.use_mam)
      // The bottleneck ratio is clamped so narrow modules still get a gate.
      mam_ = std::make_unique<Mam<T>>(cout, std::min(cfg.reduction_ratio, cout),
                                      cfg.attention_kernel_sizes, cfg.branch_input());
    if (projection_) {
      short_conv_ = Conv2d<T>(3, cin, cout, stride, false);
      short_bn_ = BatchNorm2d<T>(cout);
    }
  }

  void init(Rng& rng) {
    conv1_.init(rng);
    conv2_.init(rng);
    if (mam_) mam_->init(rng);
    if (projection_) short_conv_.init(rng);
  }

  void register_params(ParamRegistry<T>& reg, ParamRegistry<T>& state, const std::string& prefix) {
    conv1_.register_params(reg, prefix + ".conv1");
    bn1_.register_params(reg, prefix + ".bn1");
    conv2_.register_params(reg, prefix + ".conv2");
    bn2_.register_params(reg, prefix + ".bn2");
    if (mam_) mam_->register_params(reg, prefix + ".mam");
    if (projection_) {
      short_conv_.register_params(reg, prefix + ".short");
      short_bn_.register_params(reg, prefix + ".short_bn");
    }
    state.add(prefix + ".bn1.running_mean", &bn1_.running_mean(), nullptr, false);
    state.add(prefix + ".bn1.running_var", &bn1_.running_var(), nullptr, false);
    state.add(prefix + ".bn2.running_mean", &bn2_.running_mean(), nullptr, false);
    state.add(prefix + ".bn2.running_var", &bn2_.running_var(), nullptr, false);
    if (projection_) {
      state.add(prefix + ".short_bn.running_mean", &short_bn_.running_mean(), nullptr, false);
      state.add(prefix + ".short_bn.running_var", &short_bn_.running_var(), nullptr, false);
    }
  }

  const Tensor<T>& forward(const Tensor<T>& x, bool train) {
    conv1_.forward(x, c1_);
    bn1_.forward(c1_, r1_, train);
    relu_forward_inplace(r1_);
    conv2_.forward(r1_, c2_);
    bn2_.forward(c2_, b2_, train);
    const Tensor<T>& refined = mam_ ? mam_->forward(b2_) : b2_;
    if (projection_) {
      short_conv_.forward(x, s1_);
      short_bn_.forward(s1_, s2_, train);
    }
    const Tensor<T>& sc = projection_ ? s2_ : x;
    out_.resize(refined.n(), refined.h(), refined.w(), refined.c());
    for (int64_t i = 0; i < out_.size(); ++i) out_.data()[i] = refined.data()[i] + sc.data()[i];
    relu_forward_inplace(out_);
    return out_;
  }

  // x must be the tensor passed to the matching forward call.
  void backward(const Tensor<T>& x, const Tensor<T>& dy, Tensor<T>& dx, BackpropMode mode) {
    const bool guided = mode == BackpropMode::guided;
    Tensor<T> dsum;
    relu_backward(out_, dy, dsum, guided);
    Tensor<T> db2;
    if (mam_) {
      mam_->backward(b2_, dsum, db2, guided);
    } else {
      db2 = dsum;
    }
    Tensor<T> dc2, dr1, db1, dc1;
    bn2_.backward(c2_, db2, &dc2);
    conv2_.backward(r1_, dc2, &dr1);
    relu_backward(r1_, dr1, db1, guided);
    bn1_.backward(c1_, db1, &dc1);
    conv1_.backward(x, dc1, &dx);
    if (projection_) {
      Tensor<T> ds1, dxs;
      short_bn_.backward(s1_, dsum, &ds1);
      short_conv_.backward(x, ds1, &dxs);
      for (int64_t i = 0; i < dx.size(); ++i) dx.data()[i] += dxs.data()[i];
    } else {
      for (int64_t i = 0; i < dx.size(); ++i) dx.data()[i] += dsum.data()[i];
    }
  }

  const Tensor<T>& output() const { return out_; }
  Mam<T>* mam() { return mam_.get(); }

 private:
  bool projection_ = false;
  Conv2d<T> conv1_, conv2_, short_conv_;
  BatchNorm2d<T> bn1_, bn2_, short_bn_;
  std::unique_ptr<Mam<T>> mam_;
  Tensor<T> c1_, r1_, c2_, b2_, s1_, s2_, out_;
};

template <typename T>
struct ForwardResult {
  Tensor<T> logits;  // (N, gh, gw, 1), pre-sigmoid
  Tensor<T> probs;   // sigmoid(logits)
  Tensor<T> aux2, aux3;  // companion logits, same grid

  // Convenience for the standard 1x1 grid.
  T logit(int64_t i) const { return logits.data()[i * logits.h() * logits.w()]; }
  T prob(int64_t i) const { return probs.data()[i * probs.h() * probs.w()]; }
};

// CELNet: 3x3 convolution head, three multi-branch-attention residual
// modules, companion output heads on modules 2 and 3, 1x1 scoring head over
// the concatenated companion vectors. Fully convolutional: inputs larger than
// the configured size produce a sliding-window logit grid.
template <typename T>
class CelnetModel {
 public:
  explicit CelnetModel(const CelnetConfig& cfg, uint64_t seed = 1) : cfg_(cfg) {
    cfg_.validate();
    const int c1 = cfg.module_channels[0], c2 = cfg.module_channels[1], c3 = cfg.module_channels[2];
    head_conv_ = Conv2d<T>(3, 3, cfg.head_channels, 1, false);
    head_bn_ = BatchNorm2d<T>(cfg.head_channels);
    auto make_module = [&](int cin, int cout, int stride) {
      std::vector<ResBlock<T>> blocks;
      blocks.emplace_back(cin, cout, stride, cfg_);
      for (int b = 1; b < cfg.blocks_per_module; ++b) blocks.emplace_back(cout, cout, 1, cfg_);
      return blocks;
    };
    m1_ = make_module(cfg.head_channels, c1, 1);
    m2_ = make_module(c1, c2, 2);
    m3_ = make_module(c2, c3, 2);
    final_head_ = Conv2d<T>(1, 2 * c2 + 2 * c3, 1, 1, true);
    aux2_head_ = Conv2d<T>(1, 2 * c2, 1, 1, true);
    aux3_head_ = Conv2d<T>(1, 2 * c3, 1, 1, true);
    register_all();
    Rng rng(seed);
    head_conv_.init(rng);
    for (auto* m : {&m1_, &m2_, &m3_})
      for (auto& b : *m) b.init(rng);
    final_head_.init(rng);
    aux2_head_.init(rng);
    aux3_head_.init(rng);
  }

  CelnetModel(const CelnetModel&) = delete;
  CelnetModel& operator=(const CelnetModel&) = delete;

  const CelnetConfig& config() const { return cfg_; }

  void set_train(bool train) { train_ = train; }
  bool training() const { return train_; }

  int64_t parameter_count() const { return params_.total_size(); }
  ParamRegistry<T>& params() { return params_; }
  ParamRegistry<T>& state() { return state_; }

  // ---- staged forward ----------------------------------------------------

  // Input -> F2 (output of module 2).
  const Tensor<T>& forward_to_f2(const Tensor<T>& x) {
    CELNET_CHECK_ARG(x.c() == 3, "expected 3-channel input, got %lld", (long long)x.c());
    CELNET_CHECK_ARG(x.h() >= cfg_.input_size && x.w() >= cfg_.input_size,
                     "input %lldx%lld below the minimum receptive footprint %dx%d "
                     "(the network downsamples 4x and pools over input_size/4 windows)",
                     (long long)x.h(), (long long)x.w(), cfg_.input_size, cfg_.input_size);
    input_shape_ = x.shape();
    head_conv_.forward(x, head_out_);
    head_bn_.forward(head_out_, head_act_, train_);
    relu_forward_inplace(head_act_);
    const Tensor<T>* cur = &head_act_;
    for (auto& b : m1_) cur = &b.forward(*cur, train_);
    for (auto& b : m2_) cur = &b.forward(*cur, train_);
    return *cur;
  }

  // F2 -> F3 (output of module 3).
  const Tensor<T>& forward_to_f3(const Tensor<T>& f2) {
    const Tensor<T>* cur = &f2;
    for (auto& b : m3_) cur = &b.forward(*cur, train_);
    return *cur;
  }

  // Companion heads + final 1x1 scoring head.
  ForwardResult<T> forward_heads(const Tensor<T>& f2, const Tensor<T>& f3) {
    const int win2 = cfg_.input_size / 2, win3 = cfg_.input_size / 4;
    const int st2 = cfg_.eval_stride_px / 2, st3 = cfg_.eval_stride_px / 4;
    const int64_t gh = (input_shape_[1] - cfg_.input_size) / cfg_.eval_stride_px + 1;
    const int64_t gw = (input_shape_[2] - cfg_.input_size) / cfg_.eval_stride_px + 1;
    avg2_.forward(f2, win2, st2, avg2_out_, gh, gw);
    max2_.forward(f2, win2, st2, max2_out_, gh, gw);
    avg3_.forward(f3, win3, st3, avg3_out_, gh, gw);
    max3_.forward(f3, win3, st3, max3_out_, gh, gw);
    concat_channels(avg2_out_, max2_out_, comp2_);
    concat_channels(avg3_out_, max3_out_, comp3_);
    concat_channels(comp2_, comp3_, allcat_);
    ForwardResult<T> r;
    final_head_.forward(allcat_, r.logits);
    aux2_head_.forward(comp2_, r.aux2);
    aux3_head_.forward(comp3_, r.aux3);
    sigmoid_forward(r.logits, r.probs);
    last_grid_n_ = r.logits.n();
    last_grid_h_ = r.logits.h();
    last_grid_w_ = r.logits.w();
    return r;
  }

  // Full pass. Keeps activations for a later backward().
  ForwardResult<T> forward(const Tensor<T>& x) {
    input_ = x;
    f2_ = &forward_to_f2(input_);
    f3_ = &forward_to_f3(*f2_);
    has_forward_ = true;
    return forward_heads(*f2_, *f3_);
  }

  const Tensor<T>& f2() const {
    CELNET_CHECK_STATE(has_forward_, "feature stack requested before forward");
    return *f2_;
  }
  const Tensor<T>& f3() const {
    CELNET_CHECK_STATE(has_forward_, "feature stack requested before forward");
    return *f3_;
  }

  // ---- backward ----------------------------------------------------------

  // Seeds are gradients w.r.t. the (pre-sigmoid) logit grids; aux seeds may be
  // empty. Parameter gradients accumulate into the registry; input/F2/F3
  // gradients are captured and readable via grad().
  void backward(const Tensor<T>& dmain, const Tensor<T>* daux2, const Tensor<T>* daux3,
                BackpropMode mode = BackpropMode::standard) {
    CELNET_CHECK_STATE(has_forward_, "backward called before forward");
    Tensor<T> dallcat, dcomp2_final, dcomp3_final;
    final_head_.backward(allcat_, dmain, &dallcat);
    split_channels(dallcat, dcomp2_final, dcomp3_final, comp2_.c());
    if (daux2) {
      Tensor<T> dcomp2_aux;
      aux2_head_.backward(comp2_, *daux2, &dcomp2_aux);
      for (int64_t i = 0; i < dcomp2_final.size(); ++i)
        dcomp2_final.data()[i] += dcomp2_aux.data()[i];
    }
    if (daux3) {
      Tensor<T> dcomp3_aux;
      aux3_head_.backward(comp3_, *daux3, &dcomp3_aux);
      for (int64_t i = 0; i < dcomp3_final.size(); ++i)
        dcomp3_final.data()[i] += dcomp3_aux.data()[i];
    }
    Tensor<T> davg2, dmax2, davg3, dmax3;
    split_channels(dcomp2_final, davg2, dmax2, avg2_out_.c());
    split_channels(dcomp3_final, davg3, dmax3, avg3_out_.c());
    Tensor<T> tmp;
    avg3_.backward(*f3_, davg3, d_f3_);
    max3_.backward(*f3_, dmax3, tmp);
    for (int64_t i = 0; i < d_f3_.size(); ++i) d_f3_.data()[i] += tmp.data()[i];
    // Module 3, from F3 back to F2.
    Tensor<T> cur = d_f3_;
    for (size_t b = m3_.size(); b-- > 0;) {
      const Tensor<T>& in = b == 0 ? *f2_ : m3_[b - 1].output();
      Tensor<T> din;
      m3_[b].backward(in, cur, din, mode);
      cur = std::move(din);
    }
    d_f2_ = std::move(cur);
    avg2_.backward(*f2_, davg2, tmp);
    for (int64_t i = 0; i < d_f2_.size(); ++i) d_f2_.data()[i] += tmp.data()[i];
    max2_.backward(*f2_, dmax2, tmp);
    for (int64_t i = 0; i < d_f2_.size(); ++i) d_f2_.data()[i] += tmp.data()[i];
    // Module 2 back to module 1.
    Tensor<T> flow = d_f2_;
    for (size_t b = m2_.size(); b-- > 0;) {
      const Tensor<T>& in = b == 0 ? m1_.back().output() : m2_[b - 1].output();
      Tensor<T> din;
      m2_[b].backward(in, flow, din, mode);
      flow = std::move(din);
    }
    for (size_t b = m1_.size(); b-- > 0;) {
      const Tensor<T>& in = b == 0 ? head_act_ : m1_[b - 1].output();
      Tensor<T> din;
      m1_[b].backward(in, flow, din, mode);
      flow = std::move(din);
    }
    Tensor<T> dhead_bn_out, dhead_conv_out;
    relu_backward(head_act_, flow, dhead_bn_out, mode == BackpropMode::guided);
    head_bn_.backward(head_out_, dhead_bn_out, &dhead_conv_out);
    head_conv_.backward(input_, dhead_conv_out, &d_input_);
    has_grads_ = true;
  }

  // dS/dtarget where S is the sum of the (pre-sigmoid) logit grid.
  const Tensor<T>& score_gradients(GradTarget target, BackpropMode mode = BackpropMode::standard) {
    CELNET_CHECK_STATE(has_forward_, "score_gradients requires a retained forward pass");
    Tensor<T> seed(last_grid_n_, last_grid_h_, last_grid_w_, 1);
    seed.fill(T(1));
    backward(seed, nullptr, nullptr, mode);
    return grad(target);
  }

  const Tensor<T>& grad(GradTarget target) const {
    CELNET_CHECK_STATE(has_grads_, "gradients were not retained; call backward first");
    switch (target) {
      case GradTarget::input: return d_input_;
      case GradTarget::f2: return d_f2_;
      default: return d_f3_;
    }
  }

  // ---- checkpointing -----------------------------------------------------

  void save(const std::string& path) {
    auto file = h5::create_file(path);
    json cfg_json = cfg_;
    h5::write_string(file, "/config", cfg_json.dump());
    h5::write_array<int64_t>(file, "/format_version", {1},
                             std::vector<int64_t>{1}.data());
    h5::make_group(file, "/params");
    h5::make_group(file, "/state");
    auto dump = [&](const char* group, ParamRegistry<T>& reg) {
      for (auto& p : reg.items()) {
        std::vector<float> buf(size_t(p.value->size()));
        for (int64_t i = 0; i < p.value->size(); ++i) buf[size_t(i)] = float(p.value->data()[i]);
        auto sh = p.value->shape();
        h5::write_array<float>(file, std::string(group) + "/" + p.name,
                               {hsize_t(sh[0]), hsize_t(sh[1]), hsize_t(sh[2]), hsize_t(sh[3])},
                               buf.data());
      }
    };
    dump("/params", params_);
    dump("/state", state_);
  }

  static std::unique_ptr<CelnetModel<T>> load(const std::string& path) {
    auto file = h5::open_file(path);
    CelnetConfig cfg = json::parse(h5::read_string(file, "/config")).get<CelnetConfig>();
    auto model = std::make_unique<CelnetModel<T>>(cfg, 1);
    model->load_arrays(file, path);
    return model;
  }

  // Fills this model's parameters from a checkpoint; the stored config must
  // match this model's config exactly.
  void load_into(const std::string& path) {
    auto file = h5::open_file(path);
    json stored = json::parse(h5::read_string(file, "/config"));
    json mine = cfg_;
    CELNET_CHECK_ARG(stored == mine,
                     "checkpoint config mismatch: stored %s vs model %s",
                     stored.dump().c_str(), mine.dump().c_str());
    load_arrays(file, path);
  }

 private:
  void load_arrays(hid_t file, const std::string& path) {
    auto fill = [&](const char* group, ParamRegistry<T>& reg) {
      auto names = h5::list_group(file, group);
      std::map<std::string, bool> seen;
      for (auto& n : names) seen[n] = false;
      for (auto& p : reg.items()) {
        auto it = seen.find(p.name);
        CELNET_CHECK_IO(it != seen.end(), "checkpoint %s: missing array '%s'", path.c_str(),
                        p.name.c_str());
        it->second = true;
        std::vector<float> buf;
        h5::read_array<float>(file, std::string(group) + "/" + p.name, buf);
        CELNET_CHECK_IO(int64_t(buf.size()) == p.value->size(),
                        "checkpoint %s: size mismatch for '%s'", path.c_str(), p.name.c_str());
        for (int64_t i = 0; i < p.value->size(); ++i) p.value->data()[i] = T(buf[size_t(i)]);
      }
      for (auto& [n, used] : seen)
        CELNET_CHECK_IO(used, "checkpoint %s: unexpected array '%s'", path.c_str(), n.c_str());
    };
    fill("/params", params_);
    fill("/state", state_);
  }

  void register_all() {
    head_conv_.register_params(params_, "head.conv");
    head_bn_.register_params(params_, "head.bn");
    state_.add("head.bn.running_mean", &head_bn_.running_mean(), nullptr, false);
    state_.add("head.bn.running_var", &head_bn_.running_var(), nullptr, false);
    auto reg_module = [&](std::vector<ResBlock<T>>& m, const std::string& prefix) {
      for (size_t b = 0; b < m.size(); ++b)
        m[b].register_params(params_, state_, prefix + ".b" + std::to_string(b + 1));
    };
    reg_module(m1_, "m1");
    reg_module(m2_, "m2");
    reg_module(m3_, "m3");
    final_head_.register_params(params_, "score");
    aux2_head_.register_params(params_, "aux2");
    aux3_head_.register_params(params_, "aux3");
  }

  CelnetConfig cfg_;
  bool train_ = false;
  Conv2d<T> head_conv_, final_head_, aux2_head_, aux3_head_;
  BatchNorm2d<T> head_bn_;
  std::vector<ResBlock<T>> m1_, m2_, m3_;
  AvgPoolWin<T> avg2_, avg3_;
  MaxPoolWin<T> max2_, max3_;
  ParamRegistry<T> params_, state_;

  Tensor<T> input_, head_out_, head_act_;
  Tensor<T> avg2_out_, max2_out_, avg3_out_, max3_out_, comp2_, comp3_, allcat_;
  const Tensor<T>* f2_ = nullptr;
  const Tensor<T>* f3_ = nullptr;
  std::array<int64_t, 4> input_shape_{};
  int64_t last_grid_n_ = 0, last_grid_h_ = 0, last_grid_w_ = 0;
  Tensor<T> d_input_, d_f2_, d_f3_;
  bool has_forward_ = false, has_grads_ = false;
};

}  // namespace celnet
