#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "core/data.hpp"
#include "core/metrics.hpp"
#include "core/model.hpp"

namespace celnet {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 64;
  double lr = 1e-4;
  std::vector<int> lr_halving_epochs = {50, 75};
  double weight_decay = 1e-5;
  double momentum = 0.9;  // Nesterov
  double aux_loss_weight = 0.3;
  bool augment = true;
  uint64_t seed = 1;

  void validate() const {
    CELNET_CHECK_ARG(epochs >= 1, "epochs must be >= 1");
    CELNET_CHECK_ARG(batch_size >= 1, "batch_size must be >= 1");
    CELNET_CHECK_ARG(lr > 0.0, "lr must be positive");
    CELNET_CHECK_ARG(weight_decay >= 0.0, "weight_decay must be >= 0");
    CELNET_CHECK_ARG(momentum >= 0.0 && momentum < 1.0, "momentum must be in [0,1)");
    CELNET_CHECK_ARG(aux_loss_weight >= 0.0 && aux_loss_weight <= 1.0,
                     "aux_loss_weight must be in [0,1]");
  }
};

inline void to_json(json& j, const TrainConfig& c) {
  j = json{{"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"lr", c.lr},
           {"lr_halving_epochs", c.lr_halving_epochs},
           {"weight_decay", c.weight_decay},
           {"momentum", c.momentum},
           {"aux_loss_weight", c.aux_loss_weight},
           {"augment", c.augment},
           {"seed", c.seed}};
}
inline void from_json(const json& j, TrainConfig& c) {
  c = TrainConfig{};
  if (j.contains("epochs")) j.at("epochs").get_to(c.epochs);
  if (j.contains("batch_size")) j.at("batch_size").get_to(c.batch_size);
  if (j.contains("lr")) j.at("lr").get_to(c.lr);
  if (j.contains("lr_halving_epochs")) j.at("lr_halving_epochs").get_to(c.lr_halving_epochs);
  if (j.contains("weight_decay")) j.at("weight_decay").get_to(c.weight_decay);
  if (j.contains("momentum")) j.at("momentum").get_to(c.momentum);
  if (j.contains("aux_loss_weight")) j.at("aux_loss_weight").get_to(c.aux_loss_weight);
  if (j.contains("augment")) j.at("augment").get_to(c.augment);
  if (j.contains("seed")) j.at("seed").get_to(c.seed);
}

// Learning rate halves at each configured epoch boundary.
inline double lr_at(int epoch, const TrainConfig& cfg) {
  CELNET_CHECK_ARG(epoch >= 0 && epoch < cfg.epochs, "epoch %d outside [0,%d)", epoch, cfg.epochs);
  double lr = cfg.lr;
  for (int h : cfg.lr_halving_epochs)
    if (epoch >= h) lr *= 0.5;
  return lr;
}

// ---------------------------------------------------------------------------
// Dihedral-8 augmentation on square uint8 images.

inline void augment_image(const uint8_t* src, int h, int w, int channels, int element,
                          uint8_t* dst) {
  CELNET_CHECK_ARG(h == w, "dihedral augmentation requires square images (%dx%d)", h, w);
  CELNET_CHECK_ARG(element >= 0 && element < 8, "dihedral element must be in [0,8)");
  const int size = h;
  const int rot = element & 3;
  const bool flip = element & 4;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      int sy = y, sx = x;
      switch (rot) {  // source coordinates of destination (y,x) after rotation by 90*rot CCW
        case 0: break;
        case 1: sy = x; sx = size - 1 - y; break;
        case 2: sy = size - 1 - y; sx = size - 1 - x; break;
        case 3: sy = size - 1 - x; sx = y; break;
      }
      if (flip) sx = size - 1 - sx;
      const uint8_t* s = src + (int64_t(sy) * size + sx) * channels;
      uint8_t* d = dst + (int64_t(y) * size + x) * channels;
      for (int c = 0; c < channels; ++c) d[c] = s[c];
    }
}

// ---------------------------------------------------------------------------
// Loss: mean binary cross entropy on the main logit plus weighted auxiliary
// companion losses plus weight_decay * sum of squared decayed parameters.

inline double softplus(double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); }
inline double bce_with_logit(double logit, int label) {
  return softplus(logit) - double(label) * logit;
}

template <typename T>
struct LossBreakdown {
  double total = 0, main = 0, aux = 0, l2 = 0;
  Tensor<T> dmain, daux2, daux3;  // gradients w.r.t. the logit grids
};

template <typename T>
double l2_penalty(ParamRegistry<T>& params, double weight_decay) {
  double acc = 0.0;
  for (auto& p : params.items())
    if (p.decay) acc += sum_squares(*p.value);
  return weight_decay * acc;
}

template <typename T>
LossBreakdown<T> compute_loss(const ForwardResult<T>& out, const std::vector<uint8_t>& labels,
                              const TrainConfig& cfg, ParamRegistry<T>& params) {
  const int64_t n = out.logits.n();
  CELNET_CHECK_ARG(int64_t(labels.size()) == n, "labels/batch size mismatch");
  CELNET_CHECK_ARG(out.logits.h() == 1 && out.logits.w() == 1,
                   "training expects scalar logits per image");
  for (uint8_t l : labels) CELNET_CHECK_ARG(l <= 1, "labels must be binary");
  LossBreakdown<T> r;
  r.dmain.resize(n, 1, 1, 1);
  r.daux2.resize(n, 1, 1, 1);
  r.daux3.resize(n, 1, 1, 1);
  double main_acc = 0, aux_acc = 0;
  const double aux_w = cfg.aux_loss_weight;
  for (int64_t i = 0; i < n; ++i) {
    const int y = labels[size_t(i)];
    const double zm = double(out.logits.data()[i]);
    const double z2 = double(out.aux2.data()[i]);
    const double z3 = double(out.aux3.data()[i]);
    main_acc += bce_with_logit(zm, y);
    aux_acc += 0.5 * (bce_with_logit(z2, y) + bce_with_logit(z3, y));
    r.dmain.data()[i] = T((sigmoid(zm) - y) / double(n));
    r.daux2.data()[i] = T(aux_w * 0.5 * (sigmoid(z2) - y) / double(n));
    r.daux3.data()[i] = T(aux_w * 0.5 * (sigmoid(z3) - y) / double(n));
  }
  r.main = main_acc / double(n);
  r.aux = aux_w * aux_acc / double(n);
  r.l2 = l2_penalty(params, cfg.weight_decay);
  r.total = r.main + r.aux + r.l2;
  return r;
}

// ---------------------------------------------------------------------------
// SGD with Nesterov momentum: v <- mu v + g; w <- w - lr (g + mu v).

template <typename T>
class SgdNesterov {
 public:
  SgdNesterov(ParamRegistry<T>& params, const TrainConfig& cfg) : params_(params), cfg_(cfg) {
    velocity_.resize(params.items().size());
    for (size_t i = 0; i < velocity_.size(); ++i)
      velocity_[i].assign(size_t(params.items()[i].value->size()), 0.0);
  }

  void step(double lr) {
    const double mu = cfg_.momentum;
    auto& items = params_.items();
    for (size_t i = 0; i < items.size(); ++i) {
      Tensor<T>& w = *items[i].value;
      Tensor<T>& g = *items[i].grad;
      const double decay_g = items[i].decay ? 2.0 * cfg_.weight_decay : 0.0;
      auto& v = velocity_[i];
      for (int64_t j = 0; j < w.size(); ++j) {
        double grad = double(g.data()[j]) + decay_g * double(w.data()[j]);
        v[size_t(j)] = mu * v[size_t(j)] + grad;
        w.data()[j] = T(double(w.data()[j]) - lr * (grad + mu * v[size_t(j)]));
      }
    }
  }

 private:
  ParamRegistry<T>& params_;
  TrainConfig cfg_;
  std::vector<std::vector<double>> velocity_;
};

// ---------------------------------------------------------------------------
// Fit loop with per-epoch validation and argmin-val-loss checkpointing.

struct EpochStats {
  int epoch = 0;
  double train_loss = 0, val_loss = 0, val_accuracy = 0;
  std::optional<double> val_auc;
};

struct TrainState {
  std::vector<EpochStats> history;
  int best_epoch = -1;
  double best_val_loss = 0;
};

template <typename T>
struct EvalResult {
  double loss = 0;
  double accuracy = 0;
  std::optional<double> auc;
  std::vector<double> probs;
};

template <typename T>
std::vector<double> predict_probs(CelnetModel<T>& model, const PatchDataset& ds, int batch_size) {
  model.set_train(false);
  std::vector<double> probs;
  probs.reserve(size_t(ds.n));
  Tensor<T> batch;
  for (int64_t at = 0; at < ds.n; at += batch_size) {
    const int64_t n = std::min<int64_t>(batch_size, ds.n - at);
    batch.resize(n, ds.h, ds.w, 3);
    for (int64_t i = 0; i < n; ++i)
      image_to_tensor(ds.images.data() + (at + i) * ds.h * ds.w * 3, ds.h, ds.w, batch, i);
    auto out = model.forward(batch);
    for (int64_t i = 0; i < n; ++i) probs.push_back(double(out.prob(i)));
  }
  return probs;
}

// Full validation objective: BCE + auxiliary terms + L2, plus accuracy/AUC.
template <typename T>
EvalResult<T> evaluate_dataset(CelnetModel<T>& model, const PatchDataset& ds,
                               const TrainConfig& cfg, int batch_size = 64) {
  model.set_train(false);
  EvalResult<T> r;
  Tensor<T> batch;
  double loss_acc = 0;
  std::vector<uint8_t> lab;
  for (int64_t at = 0; at < ds.n; at += batch_size) {
    const int64_t n = std::min<int64_t>(batch_size, ds.n - at);
    batch.resize(n, ds.h, ds.w, 3);
    lab.assign(ds.labels.begin() + at, ds.labels.begin() + at + n);
    for (int64_t i = 0; i < n; ++i)
      image_to_tensor(ds.images.data() + (at + i) * ds.h * ds.w * 3, ds.h, ds.w, batch, i);
    auto out = model.forward(batch);
    auto piece = compute_loss(out, lab, cfg, model.params());
    loss_acc += (piece.main + piece.aux) * double(n);
    for (int64_t i = 0; i < n; ++i) r.probs.push_back(double(out.prob(i)));
  }
  r.loss = loss_acc / double(ds.n) + l2_penalty(model.params(), cfg.weight_decay);
  r.accuracy = accuracy(r.probs, ds.labels);
  r.auc = roc_auc(r.probs, ds.labels);
  return r;
}

using EpochCallback = std::function<void(const EpochStats&)>;

template <typename T>
TrainState fit(CelnetModel<T>& model, const PatchDataset& train_set, const PatchDataset& val_set,
               const TrainConfig& cfg, const EpochCallback& on_epoch = nullptr) {
  cfg.validate();
  train_set.validate();
  val_set.validate();
  CELNET_CHECK_ARG(train_set.n > 0 && val_set.n > 0, "datasets must be nonempty");
  CELNET_CHECK_ARG(train_set.h == train_set.w, "augmentation requires square images");

  TrainState state;
  SgdNesterov<T> opt(model.params(), cfg);
  Rng root(cfg.seed);
  std::vector<int64_t> order(size_t(train_set.n));
  for (size_t i = 0; i < order.size(); ++i) order[i] = int64_t(i);

  // Best-checkpoint snapshot (parameters + batch-norm state).
  std::vector<std::vector<T>> best_params, best_state;
  auto snapshot = [&](std::vector<std::vector<T>>& dst, ParamRegistry<T>& reg) {
    dst.clear();
    for (auto& p : reg.items())
      dst.emplace_back(p.value->data(), p.value->data() + p.value->size());
  };
  auto restore = [&](const std::vector<std::vector<T>>& src, ParamRegistry<T>& reg) {
    for (size_t i = 0; i < src.size(); ++i)
      std::copy(src[i].begin(), src[i].end(), reg.items()[i].value->data());
  };

  std::vector<uint8_t> aug_buf(size_t(train_set.h * train_set.w * 3));
  Tensor<T> batch;
  std::vector<uint8_t> lab;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at(epoch, cfg);
    // Seeded order-stable shuffle.
    Rng shuffle_rng = root.fork(uint64_t(epoch) + 0x5151);
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[size_t(shuffle_rng.below(uint64_t(i)))]);

    model.set_train(true);
    double epoch_loss = 0;
    int64_t seen = 0;
    for (int64_t at = 0; at < train_set.n; at += cfg.batch_size) {
      const int64_t n = std::min<int64_t>(cfg.batch_size, train_set.n - at);
      batch.resize(n, train_set.h, train_set.w, 3);
      lab.resize(size_t(n));
      for (int64_t i = 0; i < n; ++i) {
        const int64_t src = order[size_t(at + i)];
        lab[size_t(i)] = train_set.labels[size_t(src)];
        const uint8_t* img = train_set.images.data() + src * train_set.h * train_set.w * 3;
        if (cfg.augment) {
          // Element keyed by (epoch, source index): independent of batching.
          Rng ar = root.fork((uint64_t(epoch) << 32) ^ uint64_t(src) ^ 0xa0a0a0a0ull);
          augment_image(img, int(train_set.h), int(train_set.w), 3, int(ar.below(8)),
                        aug_buf.data());
          image_to_tensor(aug_buf.data(), train_set.h, train_set.w, batch, i);
        } else {
          image_to_tensor(img, train_set.h, train_set.w, batch, i);
        }
      }
      auto out = model.forward(batch);
      auto loss = compute_loss(out, lab, cfg, model.params());
      CELNET_CHECK_STATE(std::isfinite(loss.total), "training diverged at epoch %d (loss=%g)",
                         epoch, loss.total);
      model.params().zero_grads();
      model.backward(loss.dmain, &loss.daux2, &loss.daux3);
      opt.step(lr);
      epoch_loss += loss.total * double(n);
      seen += n;
    }

    EpochStats es;
    es.epoch = epoch;
    es.train_loss = epoch_loss / double(seen);
    auto val = evaluate_dataset(model, val_set, cfg, cfg.batch_size);
    es.val_loss = val.loss;
    es.val_accuracy = val.accuracy;
    es.val_auc = val.auc;
    state.history.push_back(es);
    if (state.best_epoch < 0 || es.val_loss < state.best_val_loss) {
      state.best_epoch = epoch;
      state.best_val_loss = es.val_loss;
      snapshot(best_params, model.params());
      snapshot(best_state, model.state());
    }
    if (on_epoch) on_epoch(es);
  }
  restore(best_params, model.params());
  restore(best_state, model.state());
  model.set_train(false);
  return state;
}

}  // namespace celnet
