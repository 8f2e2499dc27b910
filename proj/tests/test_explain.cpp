#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "core/explain.hpp"
#include "testutil.hpp"

using namespace celnet;
using celtest::fill_random;
using celtest::rel_err;

namespace {

CelnetConfig tiny_config() {
  CelnetConfig cfg;
  cfg.input_size = 32;
  cfg.module_channels = {4, 8, 16};
  cfg.blocks_per_module = 1;
  cfg.head_channels = 4;
  cfg.attention_kernel_sizes = {3, 5};
  cfg.eval_stride_px = 16;
  return cfg;
}

}  // namespace

TEST_CASE("cam formula collapses on a constant plane with constant gradient") {
  Tensor<double> feats(1, 4, 4, 1);
  feats.fill(1.0);
  Tensor<double> grads(1, 4, 4, 1);
  grads.fill(0.7);
  Tensor<double> cam = cam_from_features(feats, grads);
  for (int64_t i = 0; i < cam.size(); ++i) CHECK(cam.data()[i] == doctest::Approx(0.7));

  grads.fill(-0.7);  // negative influence is rectified away
  cam = cam_from_features(feats, grads);
  for (int64_t i = 0; i < cam.size(); ++i) CHECK(cam.data()[i] == 0.0);
}

TEST_CASE("linear-head oracle: CAM equals the closed-form weight map") {
  // Toy model: y = sum_k w_k * sum_ij F_k(i,j). The score gradient on plane k
  // is w_k everywhere, so alpha_k == w_k and CAM == ReLU(sum_k w_k F_k).
  Rng rng(20);
  const int64_t h = 6, w = 5, K = 7;
  Tensor<double> feats(1, h, w, K);
  fill_random(feats, rng, -1.0, 1.0);
  std::vector<double> head(K);
  for (auto& v : head) v = rng.uniform(-1.0, 1.0);

  // The score gradient of this head is exactly w_k on every plane-k site.
  Tensor<double> grads(1, h, w, K);
  for (int64_t p = 0; p < h * w; ++p)
    for (int64_t k = 0; k < K; ++k) grads.data()[p * K + k] = head[size_t(k)];

  Tensor<double> cam = cam_from_features(feats, grads);
  for (int64_t p = 0; p < h * w; ++p) {
    double acc = 0;
    for (int64_t k = 0; k < K; ++k) acc += head[size_t(k)] * feats.data()[p * K + k];
    double want = std::max(0.0, acc);
    CHECK(rel_err(cam.data()[p], want) < 1e-10);
  }
}

TEST_CASE("linear-head oracle through real backprop layers") {
  // Same toy built from layers: dense head on the summed plane values.
  Rng rng(21);
  const int64_t hw = 16, K = 5;
  Tensor<double> feats(1, 4, 4, K);
  fill_random(feats, rng, -1.0, 1.0);
  Dense<double> headl(int(K), 1);
  fill_random(headl.weight(), rng, -1.0, 1.0);
  headl.bias().zero();

  // forward: v_k = sum_ij F_k; y = w . v
  Tensor<double> pooled(1, 1, 1, K);
  for (int64_t k = 0; k < K; ++k) {
    double acc = 0;
    for (int64_t p = 0; p < hw; ++p) acc += feats.data()[p * K + k];
    pooled.data()[k] = acc;
  }
  Tensor<double> y;
  headl.forward(pooled, y);
  // backward: dy = 1
  Tensor<double> seed(1, 1, 1, 1);
  seed.fill(1.0);
  Tensor<double> dpooled;
  headl.backward(pooled, seed, &dpooled);
  Tensor<double> grads(1, 4, 4, K);
  for (int64_t p = 0; p < hw; ++p)
    for (int64_t k = 0; k < K; ++k) grads.data()[p * K + k] = dpooled.data()[k];

  Tensor<double> cam = cam_from_features(feats, grads);
  for (int64_t p = 0; p < hw; ++p) {
    double acc = 0;
    for (int64_t k = 0; k < K; ++k) acc += headl.weight().data()[k] * feats.data()[p * K + k];
    double want = std::max(0.0, acc);
    if (want == 0.0) {
      CHECK(cam.data()[p] == 0.0);
    } else {
      CHECK(rel_err(cam.data()[p], want) < 1e-5);
    }
  }
}

TEST_CASE("model CAMs are nonnegative at native feature resolution") {
  Rng rng(22);
  CelnetModel<float> model(tiny_config(), 31);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor<float> img(1, 32, 32, 3);
    fill_random(img, rng, 0.0, 1.0);
    Tensor<float> cam2 = compute_cam(model, img, CamLayer::module2);
    Tensor<float> cam3 = compute_cam(model, img, CamLayer::module3);
    CHECK(cam2.h() == 16);
    CHECK(cam3.h() == 8);
    for (int64_t i = 0; i < cam2.size(); ++i) CHECK(cam2.data()[i] >= 0.0f);
    for (int64_t i = 0; i < cam3.size(); ++i) CHECK(cam3.data()[i] >= 0.0f);
  }
}

TEST_CASE("csm degenerates to a zero map when the scoring head is dead") {
  CelnetModel<double> model(tiny_config(), 32);
  for (auto& p : model.params().items())
    if (p.name.rfind("score.", 0) == 0) p.value->zero();
  Rng rng(23);
  Tensor<double> img(1, 32, 32, 3);
  fill_random(img, rng, 0.0, 1.0);
  auto r = compute_csm(model, img);
  CHECK(r.degenerate);
  for (int64_t i = 0; i < r.map.size(); ++i) CHECK(r.map.data()[i] == 0.0);
}

TEST_CASE("csm values live in [0,1] for arbitrary inputs") {
  CelnetModel<float> model(tiny_config(), 33);
  Rng rng(24);
  for (int trial = 0; trial < 3; ++trial) {
    Tensor<float> img(1, 32, 32, 3);
    fill_random(img, rng, 0.0, 1.0);
    auto r = compute_csm(model, img);
    CHECK_FALSE(r.degenerate);
    for (int64_t i = 0; i < r.map.size(); ++i) {
      CHECK(r.map.data()[i] >= 0.0f);
      CHECK(r.map.data()[i] <= 1.0f);
    }
  }
}

TEST_CASE("guided backprop equals plain gradient on a rectifier-free network") {
  Rng rng(25);
  Conv2d<double> conv1(3, 2, 3, 1, true), conv2(3, 3, 1, 1, true);
  conv1.init(rng);
  conv2.init(rng);
  Tensor<double> x(1, 6, 6, 2);
  fill_random(x, rng);
  Tensor<double> a, y;
  conv1.forward(x, a);
  conv2.forward(a, y);
  Tensor<double> seed(1, 6, 6, 1);
  seed.fill(1.0);
  // Both "modes": without rectifier units in the chain, the guided rule has
  // no site to act on, so gradients must agree identically.
  Tensor<double> da, dx_plain, dx_guided;
  conv2.backward(a, seed, &da);
  conv1.backward(x, da, &dx_plain);
  conv2.backward(a, seed, &da);
  conv1.backward(x, da, &dx_guided);
  for (int64_t i = 0; i < x.size(); ++i) CHECK(dx_plain.data()[i] == dx_guided.data()[i]);
}

TEST_CASE("guided and plain input gradients differ on a real model") {
  CelnetModel<double> model(tiny_config(), 34);
  Rng rng(26);
  Tensor<double> img(1, 32, 32, 3);
  fill_random(img, rng, 0.0, 1.0);
  model.forward(img);
  Tensor<double> plain = model.score_gradients(GradTarget::input, BackpropMode::standard);
  model.forward(img);
  Tensor<double> guided = model.score_gradients(GradTarget::input, BackpropMode::guided);
  double diff = 0;
  for (int64_t i = 0; i < plain.size(); ++i) diff += std::abs(plain.data()[i] - guided.data()[i]);
  CHECK(diff > 0.0);
}

TEST_CASE("fuse_cam endpoints, affinity in alpha, and constant-map consistency") {
  Rng rng(27);
  Tensor<double> cam2(1, 8, 8, 1), cam3(1, 4, 4, 1);
  fill_random(cam2, rng, 0.0, 1.0);
  fill_random(cam3, rng, 0.0, 1.0);
  Tensor<double> at0 = fuse_cam(cam2, cam3, 0.0, 16, 16);
  Tensor<double> up2 = upsample_bilinear(cam2, 16, 16);
  for (int64_t i = 0; i < at0.size(); ++i) CHECK(at0.data()[i] == up2.data()[i]);
  Tensor<double> at1 = fuse_cam(cam2, cam3, 1.0, 16, 16);
  Tensor<double> up3 = upsample_bilinear(cam3, 16, 16);
  for (int64_t i = 0; i < at1.size(); ++i) CHECK(at1.data()[i] == up3.data()[i]);

  // affine in alpha: f(a) == (1-a) f(0) + a f(1)
  for (double a : {0.25, 0.5, 0.75}) {
    Tensor<double> fa = fuse_cam(cam2, cam3, a, 16, 16);
    for (int64_t i = 0; i < fa.size(); ++i)
      CHECK(fa.data()[i] ==
            doctest::Approx((1 - a) * at0.data()[i] + a * at1.data()[i]).epsilon(1e-12));
  }

  Tensor<double> const2(1, 8, 8, 1), const3(1, 4, 4, 1);
  const2.fill(0.8);
  const3.fill(0.4);
  Tensor<double> mid = fuse_cam(const2, const3, 0.5, 32, 32);
  for (int64_t i = 0; i < mid.size(); ++i) CHECK(mid.data()[i] == doctest::Approx(0.6));

  const3.fill(0.8);
  for (double a : {0.0, 0.3, 1.0}) {
    Tensor<double> same = fuse_cam(const2, const3, a, 24, 24);
    for (int64_t i = 0; i < same.size(); ++i) CHECK(same.data()[i] == doctest::Approx(0.8));
  }

  CHECK_THROWS_AS(fuse_cam(cam2, cam3, 1.5, 16, 16), Error);
  CHECK_THROWS_AS(fuse_cam(cam2, cam3, -0.1, 16, 16), Error);
}

TEST_CASE("fuse_celm endpoints, the worked constant example, and attenuation") {
  Rng rng(28);
  Tensor<double> mc(1, 6, 6, 1), ms(1, 6, 6, 1);
  fill_random(mc, rng, 0.0, 2.0);
  fill_random(ms, rng, 0.0, 1.0);
  Tensor<double> b0 = fuse_celm(mc, ms, 0.0);
  for (int64_t i = 0; i < b0.size(); ++i) CHECK(b0.data()[i] == mc.data()[i]);
  Tensor<double> b1 = fuse_celm(mc, ms, 1.0);
  for (int64_t i = 0; i < b1.size(); ++i)
    CHECK(b1.data()[i] == doctest::Approx(mc.data()[i] * ms.data()[i]));

  Tensor<double> c5(1, 2, 2, 1), s5(1, 2, 2, 1);
  c5.fill(0.5);
  s5.fill(0.5);
  Tensor<double> m = fuse_celm(c5, s5, 0.5);
  for (int64_t i = 0; i < m.size(); ++i) CHECK(m.data()[i] == doctest::Approx(0.375));

  for (double beta : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    Tensor<double> out = fuse_celm(mc, ms, beta);
    for (int64_t i = 0; i < out.size(); ++i) CHECK(out.data()[i] <= mc.data()[i] + 1e-15);
  }

  Tensor<double> wrong(1, 3, 3, 1);
  CHECK_THROWS_AS(fuse_celm(mc, wrong, 0.5), Error);
}

TEST_CASE("full explanation bundle has input-resolution fused maps") {
  CelnetModel<float> model(tiny_config(), 35);
  Rng rng(29);
  Tensor<float> img(1, 32, 32, 3);
  fill_random(img, rng, 0.0, 1.0);
  FusionConfig fusion;
  auto maps = compute_explanations(model, img, fusion);
  CHECK(maps.cam_fused.h() == 32);
  CHECK(maps.cam_fused.w() == 32);
  CHECK(maps.celm.h() == 32);
  CHECK(maps.csm.h() == 32);
  CHECK(maps.cam2.h() == 16);
  CHECK(maps.cam3.h() == 8);
  for (int64_t i = 0; i < maps.celm.size(); ++i) {
    CHECK(maps.celm.data()[i] <= maps.cam_fused.data()[i] + 1e-6f);
    CHECK(maps.cam_fused.data()[i] >= 0.0f);
  }
  CHECK_FALSE(maps.csm_degenerate);
}

TEST_CASE("gaussian blur keeps constants constant and normalization flags degenerates") {
  Tensor<double> flat(1, 10, 10, 1);
  flat.fill(0.42);
  Tensor<double> blurred = gaussian_blur(flat, 2.0);
  for (int64_t i = 0; i < blurred.size(); ++i) CHECK(blurred.data()[i] == doctest::Approx(0.42));
  bool degenerate = false;
  Tensor<double> normed = normalize01(flat, &degenerate);
  CHECK(degenerate);
  for (int64_t i = 0; i < normed.size(); ++i) CHECK(normed.data()[i] == 0.0);
}
