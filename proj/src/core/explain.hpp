#pragma once

#include <cmath>
#include <vector>

#include "core/model.hpp"

namespace celnet {

struct FusionConfig {
  double alpha = 0.5;  // CAM3 weight in the fused activation map
  double beta = 0.5;   // weight of the CAM*CSM product term in the CELM

  void validate() const {
    CELNET_CHECK_ARG(alpha >= 0.0 && alpha <= 1.0, "alpha must be in [0,1], got %g", alpha);
    CELNET_CHECK_ARG(beta >= 0.0 && beta <= 1.0, "beta must be in [0,1], got %g", beta);
  }
};

inline void to_json(json& j, const FusionConfig& f) {
  j = json{{"alpha", f.alpha}, {"beta", f.beta}};
}
inline void from_json(const json& j, FusionConfig& f) {
  f = FusionConfig{};
  if (j.contains("alpha")) j.at("alpha").get_to(f.alpha);
  if (j.contains("beta")) j.at("beta").get_to(f.beta);
}

enum class CamLayer { module2, module3 };

// ---------------------------------------------------------------------------
// Map helpers. Single-channel maps are tensors shaped (1, h, w, 1).

template <typename T>
Tensor<T> normalize01(const Tensor<T>& map, bool* degenerate = nullptr) {
  Tensor<T> out(map.n(), map.h(), map.w(), map.c());
  T lo = map.data()[0], hi = map.data()[0];
  for (int64_t i = 0; i < map.size(); ++i) {
    lo = std::min(lo, map.data()[i]);
    hi = std::max(hi, map.data()[i]);
  }
  if (degenerate) *degenerate = !(hi > lo);
  if (!(hi > lo)) {
    out.zero();
    return out;
  }
  const T span = hi - lo;
  for (int64_t i = 0; i < map.size(); ++i) out.data()[i] = (map.data()[i] - lo) / span;
  return out;
}

// Luminance conversion of a (1,h,w,3) tensor to (1,h,w,1).
template <typename T>
Tensor<T> to_grey(const Tensor<T>& rgb) {
  CELNET_CHECK_ARG(rgb.c() == 3, "greyscale conversion expects 3 channels");
  Tensor<T> out(rgb.n(), rgb.h(), rgb.w(), 1);
  const int64_t m = rgb.n() * rgb.h() * rgb.w();
  for (int64_t i = 0; i < m; ++i) {
    const T* p = rgb.data() + i * 3;
    out.data()[i] = T(0.299) * p[0] + T(0.587) * p[1] + T(0.114) * p[2];
  }
  return out;
}

// Separable Gaussian blur of a single-channel map, kernel truncated at 4
// sigma. Border handling renormalizes by the in-bounds weight sum, so
// constant maps stay constant.
template <typename T>
Tensor<T> gaussian_blur(const Tensor<T>& map, double sigma) {
  CELNET_CHECK_ARG(map.c() == 1 && map.n() == 1, "blur expects a (1,h,w,1) map");
  if (sigma <= 0.0) return map;
  const int radius = std::max(1, int(std::lround(4.0 * sigma)));
  std::vector<double> kern(size_t(2 * radius + 1));
  for (int i = -radius; i <= radius; ++i)
    kern[size_t(i + radius)] = std::exp(-0.5 * double(i) * i / (sigma * sigma));
  const int64_t h = map.h(), w = map.w();
  Tensor<T> tmp(1, h, w, 1), out(1, h, w, 1);
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      double acc = 0, wsum = 0;
      for (int i = -radius; i <= radius; ++i) {
        int64_t xx = x + i;
        if (xx < 0 || xx >= w) continue;
        acc += kern[size_t(i + radius)] * double(map.data()[y * w + xx]);
        wsum += kern[size_t(i + radius)];
      }
      tmp.data()[y * w + x] = T(acc / wsum);
    }
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      double acc = 0, wsum = 0;
      for (int i = -radius; i <= radius; ++i) {
        int64_t yy = y + i;
        if (yy < 0 || yy >= h) continue;
        acc += kern[size_t(i + radius)] * double(tmp.data()[yy * w + x]);
        wsum += kern[size_t(i + radius)];
      }
      out.data()[y * w + x] = T(acc / wsum);
    }
  return out;
}

// Bilinear resize (half-pixel centers) of a (1,h,w,1) map.
template <typename T>
Tensor<T> upsample_bilinear(const Tensor<T>& map, int64_t out_h, int64_t out_w) {
  CELNET_CHECK_ARG(map.c() == 1 && map.n() == 1, "upsample expects a (1,h,w,1) map");
  Tensor<T> out(1, out_h, out_w, 1);
  const int64_t h = map.h(), w = map.w();
  const double sy = double(h) / double(out_h), sx = double(w) / double(out_w);
  for (int64_t y = 0; y < out_h; ++y) {
    double fy = (double(y) + 0.5) * sy - 0.5;
    int64_t y0 = int64_t(std::floor(fy));
    double wy = fy - double(y0);
    int64_t y0c = std::clamp<int64_t>(y0, 0, h - 1), y1c = std::clamp<int64_t>(y0 + 1, 0, h - 1);
    for (int64_t x = 0; x < out_w; ++x) {
      double fx = (double(x) + 0.5) * sx - 0.5;
      int64_t x0 = int64_t(std::floor(fx));
      double wx = fx - double(x0);
      int64_t x0c = std::clamp<int64_t>(x0, 0, w - 1), x1c = std::clamp<int64_t>(x0 + 1, 0, w - 1);
      double v = (1 - wy) * ((1 - wx) * double(map.data()[y0c * w + x0c]) +
                             wx * double(map.data()[y0c * w + x1c])) +
                 wy * ((1 - wx) * double(map.data()[y1c * w + x0c]) +
                       wx * double(map.data()[y1c * w + x1c]));
      out.data()[y * out_w + x] = T(v);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cancer activation map: rectified sum of feature planes weighted by the
// spatial mean of the score gradient on each plane.

template <typename T>
Tensor<T> cam_from_features(const Tensor<T>& feats, const Tensor<T>& grads, int64_t image = 0) {
  CELNET_CHECK_ARG(feats.same_shape(grads), "feature/gradient shape mismatch");
  const int64_t h = feats.h(), w = feats.w(), c = feats.c(), hw = h * w;
  std::vector<double> alpha(size_t(c), 0.0);
  const T* g = grads.image(image);
  for (int64_t p = 0; p < hw; ++p)
    for (int64_t q = 0; q < c; ++q) alpha[size_t(q)] += double(g[p * c + q]);
  for (int64_t q = 0; q < c; ++q) alpha[size_t(q)] /= double(hw);
  Tensor<T> map(1, h, w, 1);
  const T* f = feats.image(image);
  for (int64_t p = 0; p < hw; ++p) {
    double acc = 0.0;
    for (int64_t q = 0; q < c; ++q) acc += alpha[size_t(q)] * double(f[p * c + q]);
    map.data()[p] = acc > 0.0 ? T(acc) : T(0);
  }
  return map;
}

// Runs forward + backward on a single image and returns the CAM at the
// requested layer, at that layer's native resolution.
template <typename T>
Tensor<T> compute_cam(CelnetModel<T>& model, const Tensor<T>& image, CamLayer layer) {
  CELNET_CHECK_ARG(image.n() == 1, "compute_cam expects a single image");
  model.set_train(false);
  model.forward(image);
  GradTarget target = layer == CamLayer::module2 ? GradTarget::f2 : GradTarget::f3;
  const Tensor<T>& grads = model.score_gradients(target);
  const Tensor<T>& feats = layer == CamLayer::module2 ? model.f2() : model.f3();
  return cam_from_features(feats, grads, 0);
}

// ---------------------------------------------------------------------------
// Cancer saliency map via guided backpropagation.

template <typename T>
struct SaliencyResult {
  Tensor<T> map;  // (1,H,W,1), values in [0,1]
  bool degenerate = false;
};

template <typename T>
SaliencyResult<T> compute_csm(CelnetModel<T>& model, const Tensor<T>& image, double sigma = 2.0) {
  CELNET_CHECK_ARG(image.n() == 1, "compute_csm expects a single image");
  model.set_train(false);
  model.forward(image);
  const Tensor<T>& w = model.score_gradients(GradTarget::input, BackpropMode::guided);
  SaliencyResult<T> r;
  Tensor<T> normed = normalize01(w, &r.degenerate);
  if (r.degenerate) {
    r.map.resize(1, image.h(), image.w(), 1);
    return r;
  }
  r.map = gaussian_blur(to_grey(normed), sigma);
  return r;
}

// ---------------------------------------------------------------------------
// Fusion.

template <typename T>
Tensor<T> fuse_cam(const Tensor<T>& cam2, const Tensor<T>& cam3, double alpha, int64_t out_h,
                   int64_t out_w) {
  CELNET_CHECK_ARG(alpha >= 0.0 && alpha <= 1.0, "alpha must be in [0,1], got %g", alpha);
  Tensor<T> u2 = upsample_bilinear(cam2, out_h, out_w);
  Tensor<T> u3 = upsample_bilinear(cam3, out_h, out_w);
  Tensor<T> out(1, out_h, out_w, 1);
  for (int64_t i = 0; i < out.size(); ++i)
    out.data()[i] = T(alpha * double(u3.data()[i]) + (1.0 - alpha) * double(u2.data()[i]));
  return out;
}

template <typename T>
Tensor<T> fuse_celm(const Tensor<T>& cam_fused, const Tensor<T>& csm, double beta) {
  CELNET_CHECK_ARG(beta >= 0.0 && beta <= 1.0, "beta must be in [0,1], got %g", beta);
  CELNET_CHECK_ARG(cam_fused.same_shape(csm), "CAM/CSM shape mismatch");
  Tensor<T> out(1, cam_fused.h(), cam_fused.w(), 1);
  for (int64_t i = 0; i < out.size(); ++i) {
    double mc = double(cam_fused.data()[i]), ms = double(csm.data()[i]);
    out.data()[i] = T(beta * mc * ms + (1.0 - beta) * mc);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Full explanation bundle for one image.

template <typename T>
struct ExplanationMaps {
  Tensor<T> cam2, cam3;      // native resolution, unnormalized
  Tensor<T> cam_fused;       // input resolution, built from normalized CAMs
  Tensor<T> csm;             // input resolution, [0,1]
  Tensor<T> celm;            // input resolution
  bool csm_degenerate = false;
};

template <typename T>
ExplanationMaps<T> compute_explanations(CelnetModel<T>& model, const Tensor<T>& image,
                                        const FusionConfig& fusion, double csm_sigma = 2.0) {
  fusion.validate();
  CELNET_CHECK_ARG(image.n() == 1, "explanations are computed per image");
  model.set_train(false);
  model.forward(image);
  // Standard backprop for the CAM weights; features stay valid afterwards.
  Tensor<T> g2 = model.score_gradients(GradTarget::f2);
  Tensor<T> g3 = model.grad(GradTarget::f3);
  ExplanationMaps<T> maps;
  maps.cam2 = cam_from_features(model.f2(), g2, 0);
  maps.cam3 = cam_from_features(model.f3(), g3, 0);
  // Guided pass for the saliency map reuses the same forward activations.
  const Tensor<T>& w = model.score_gradients(GradTarget::input, BackpropMode::guided);
  Tensor<T> normed = normalize01(w, &maps.csm_degenerate);
  if (maps.csm_degenerate) {
    maps.csm.resize(1, image.h(), image.w(), 1);
  } else {
    maps.csm = gaussian_blur(to_grey(normed), csm_sigma);
  }
  // CAMs are min-max normalized before fusion so layer scale does not swamp
  // the convex combination.
  Tensor<T> n2 = normalize01(maps.cam2);
  Tensor<T> n3 = normalize01(maps.cam3);
  maps.cam_fused = fuse_cam(n2, n3, fusion.alpha, image.h(), image.w());
  maps.celm = fuse_celm(maps.cam_fused, maps.csm, fusion.beta);
  return maps;
}

}  // namespace celnet
