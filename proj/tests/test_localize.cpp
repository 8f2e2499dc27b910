#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "core/localize.hpp"
#include "testutil.hpp"

using namespace celnet;

namespace {

GroundTruthMask gt_from(int64_t h, int64_t w, const std::vector<uint8_t>& data) {
  GroundTruthMask g;
  g.h = h;
  g.w = w;
  g.data = data;
  g.validate();
  return g;
}

// Test-side flood fill (4-neighbour growth repeated over diagonal merges is
// avoided; use straight 8-neighbour BFS written independently of the library).
int count_regions(int64_t h, int64_t w, const std::vector<uint8_t>& grid) {
  std::vector<uint8_t> seen(size_t(h * w), 0);
  int regions = 0;
  std::vector<int64_t> queue;
  for (int64_t s = 0; s < h * w; ++s) {
    if (!grid[size_t(s)] || seen[size_t(s)]) continue;
    ++regions;
    queue.assign(1, s);
    seen[size_t(s)] = 1;
    while (!queue.empty()) {
      int64_t p = queue.back();
      queue.pop_back();
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          int64_t y = p / w + dy, x = p % w + dx;
          if (y < 0 || y >= h || x < 0 || x >= w) continue;
          int64_t q = y * w + x;
          if (grid[size_t(q)] && !seen[size_t(q)]) {
            seen[size_t(q)] = 1;
            queue.push_back(q);
          }
        }
    }
  }
  return regions;
}

}  // namespace

TEST_CASE("uniform field is one component covering everything") {
  Tensor<float> map(1, 12, 12, 1);
  map.fill(1.0f);
  EvidenceMask m = map_to_mask(map, 0.5, 1.0, 4);
  REQUIRE(m.components.size() == 1);
  CHECK(int64_t(m.components[0].size()) == 144);
}

TEST_CASE("all-zero map gives an empty mask, not an error") {
  Tensor<float> map(1, 9, 9, 1);
  EvidenceMask m = map_to_mask(map, 0.5, 1.0, 4);
  CHECK(m.components.empty());
  for (uint8_t v : m.data) CHECK(v == 0);
}

TEST_CASE("two bright squares give two components with plausible areas") {
  Tensor<float> map(1, 32, 32, 1);
  for (int64_t y = 2; y < 8; ++y)
    for (int64_t x = 2; x < 8; ++x) map.at(0, y, x, 0) = 1.0f;
  for (int64_t y = 20; y < 26; ++y)
    for (int64_t x = 20; x < 26; ++x) map.at(0, y, x, 0) = 1.0f;
  EvidenceMask m = map_to_mask(map, 0.5, 0.8, 4);
  REQUIRE(m.components.size() == 2);
  CHECK(count_regions(32, 32, m.data) == 2);
  for (const auto& comp : m.components) {
    CHECK(comp.size() >= 25);   // erosion bound
    CHECK(comp.size() <= 100);  // dilation bound
  }
}

TEST_CASE("relative threshold makes map_to_mask scale invariant") {
  celnet::Rng rng(40);
  Tensor<float> map(1, 16, 16, 1);
  for (int64_t i = 0; i < map.size(); ++i) map.data()[i] = float(rng.uniform());
  EvidenceMask base = map_to_mask(map, 0.5, 1.0, 2);
  for (float scale : {2.0f, 0.25f, 8.0f}) {  // powers of two: exact under fp scaling
    Tensor<float> scaled = map;
    for (int64_t i = 0; i < scaled.size(); ++i) scaled.data()[i] *= scale;
    EvidenceMask m = map_to_mask(scaled, 0.5, 1.0, 2);
    CHECK(m.data == base.data);
  }
}

TEST_CASE("raising the threshold never grows the masked area") {
  celnet::Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor<float> map(1, 20, 20, 1);
    for (int64_t i = 0; i < map.size(); ++i) map.data()[i] = float(rng.uniform());
    int64_t prev = 400;
    for (double thr : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      EvidenceMask m = map_to_mask(map, thr, 0.5, 1);
      int64_t area = 0;
      for (uint8_t v : m.data) area += v;
      CHECK(area <= prev);
      prev = area;
    }
  }
}

TEST_CASE("component classification rules") {
  // 10x10, tumor = left half
  std::vector<uint8_t> gt_data(100, 0);
  for (int64_t y = 0; y < 10; ++y)
    for (int64_t x = 0; x < 5; ++x) gt_data[size_t(y * 10 + x)] = 1;
  GroundTruthMask gt = gt_from(10, 10, gt_data);

  std::vector<int64_t> inside = {0, 1, 2, 10, 11, 12};  // fully on tumor
  CHECK(classify_component(inside, gt) == ComponentClass::true_positive);

  std::vector<int64_t> mostly_normal;  // 1 of 5 pixels on tumor
  mostly_normal = {4, 5, 6, 7, 8};
  CHECK(classify_component(mostly_normal, gt) == ComponentClass::false_positive);

  std::vector<int64_t> split_60_40 = {0, 1, 2, 5, 6};  // 3/5 tumor
  CHECK(classify_component(split_60_40, gt) == ComponentClass::neither);

  // exact 75% boundary counts as TP
  std::vector<int64_t> exact = {0, 1, 2, 5};  // 3/4 on tumor
  CHECK(classify_component(exact, gt) == ComponentClass::true_positive);
  // exact 75% on normal counts as FP
  std::vector<int64_t> exact_fp = {0, 5, 6, 7};
  CHECK(classify_component(exact_fp, gt) == ComponentClass::false_positive);

  CHECK_THROWS_AS(classify_component({}, gt), Error);
}

TEST_CASE("classification agrees with per-pixel brute force on 1000 random masks") {
  celnet::Rng rng(42);
  for (int trial = 0; trial < 1000; ++trial) {
    const int64_t h = 12, w = 12;
    std::vector<uint8_t> gt_data(size_t(h * w));
    for (auto& v : gt_data) v = rng.uniform() < 0.45 ? 1 : 0;
    GroundTruthMask gt = gt_from(h, w, gt_data);
    std::vector<int64_t> comp;
    for (int64_t p = 0; p < h * w; ++p)
      if (rng.uniform() < 0.2) comp.push_back(p);
    if (comp.empty()) comp.push_back(int64_t(rng.below(uint64_t(h * w))));

    // Brute force: count every pixel, apply both fractions with >=.
    int64_t on = 0;
    for (int64_t p : comp) on += gt_data[size_t(p)];
    double tumor_frac = double(on) / double(comp.size());
    double normal_frac = double(comp.size() - on) / double(comp.size());
    ComponentClass want = tumor_frac >= 0.75  ? ComponentClass::true_positive
                          : normal_frac >= 0.75 ? ComponentClass::false_positive
                                                : ComponentClass::neither;
    ComponentClass got = classify_component(comp, gt);
    CHECK(got == want);
    const bool both_rules = tumor_frac >= 0.75 && normal_frac >= 0.75;  // rule exclusivity
    CHECK_FALSE(both_rules);
  }
}

TEST_CASE("perfect predictions score precision 1 recall 1") {
  const int64_t h = 8, w = 8;
  std::vector<uint8_t> gt_data(size_t(h * w), 0);
  for (int64_t y = 2; y < 6; ++y)
    for (int64_t x = 2; x < 6; ++x) gt_data[size_t(y * w + x)] = 1;
  std::vector<uint8_t> pred = gt_data;
  EvidenceMask m = make_mask(h, w, pred);
  LocalizationScore s = score_dataset({m}, {gt_from(h, w, gt_data)});
  REQUIRE(s.precision.has_value());
  CHECK(*s.precision == 1.0);
  REQUIRE(s.recall.has_value());
  CHECK(*s.recall == 1.0);
}

TEST_CASE("no predictions: recall 0, precision absent") {
  const int64_t h = 8, w = 8;
  std::vector<uint8_t> gt_data(size_t(h * w), 0);
  gt_data[9] = 1;
  EvidenceMask empty = make_mask(h, w, std::vector<uint8_t>(size_t(h * w), 0));
  LocalizationScore s = score_dataset({empty}, {gt_from(h, w, gt_data)});
  CHECK_FALSE(s.precision.has_value());
  REQUIRE(s.recall.has_value());
  CHECK(*s.recall == 0.0);
}

TEST_CASE("planted 7TP/2FP/1NEITHER fixture: precision 7/9, recall 0.8") {
  const int64_t h = 40, w = 40;
  std::vector<EvidenceMask> masks;
  std::vector<GroundTruthMask> gts;

  auto rect = [&](std::vector<uint8_t>& grid, int64_t y0, int64_t y1, int64_t x0, int64_t x1) {
    for (int64_t y = y0; y < y1; ++y)
      for (int64_t x = x0; x < x1; ++x) grid[size_t(y * w + x)] = 1;
  };

  // Image 0: two tumor strips; one TP component straddles both (hits 2 regions).
  {
    std::vector<uint8_t> gt(size_t(h * w), 0), pred(size_t(h * w), 0);
    rect(gt, 0, 40, 0, 10);
    rect(gt, 0, 40, 12, 22);
    rect(pred, 10, 20, 0, 22);  // 220 px, 200 on tumor -> 90.9% TP
    gts.push_back(gt_from(h, w, gt));
    masks.push_back(make_mask(h, w, pred));
  }
  // Images 1..6: one tumor each, fully-contained TP.
  for (int i = 1; i <= 6; ++i) {
    std::vector<uint8_t> gt(size_t(h * w), 0), pred(size_t(h * w), 0);
    rect(gt, 0, 40, 0, 20);
    rect(pred, 5, 10, 5, 10);
    gts.push_back(gt_from(h, w, gt));
    masks.push_back(make_mask(h, w, pred));
  }
  // Image 7: tumor present but the prediction is fully on normal tissue (FP).
  {
    std::vector<uint8_t> gt(size_t(h * w), 0), pred(size_t(h * w), 0);
    rect(gt, 0, 40, 0, 10);
    rect(pred, 5, 10, 20, 40);
    gts.push_back(gt_from(h, w, gt));
    masks.push_back(make_mask(h, w, pred));
  }
  // Image 8: normal-only image, any prediction is FP.
  {
    std::vector<uint8_t> gt(size_t(h * w), 0), pred(size_t(h * w), 0);
    rect(pred, 0, 5, 0, 5);
    gts.push_back(gt_from(h, w, gt));
    masks.push_back(make_mask(h, w, pred));
  }
  // Image 9: 60/40 straddling component (NEITHER), tumor region unhit.
  {
    std::vector<uint8_t> gt(size_t(h * w), 0), pred(size_t(h * w), 0);
    rect(gt, 0, 40, 0, 12);
    rect(pred, 0, 10, 0, 20);  // 200 px, 120 tumor -> 60%
    gts.push_back(gt_from(h, w, gt));
    masks.push_back(make_mask(h, w, pred));
  }

  LocalizationScore s = score_dataset(masks, gts);
  CHECK(s.tally.tp == 7);
  CHECK(s.tally.fp == 2);
  CHECK(s.tally.neither == 1);
  CHECK(s.tally.gt_regions_total == 10);
  CHECK(s.tally.gt_regions_hit == 8);
  REQUIRE(s.precision.has_value());
  CHECK(std::abs(*s.precision - 7.0 / 9.0) < 1e-9);
  REQUIRE(s.recall.has_value());
  CHECK(*s.recall == 0.8);
}

TEST_CASE("min_area drops specks") {
  std::vector<uint8_t> grid(64, 0);
  grid[0] = 1;           // single pixel
  grid[35] = grid[36] = grid[43] = grid[44] = 1;  // 2x2 block
  EvidenceMask m = make_mask(8, 8, grid, 4);
  REQUIRE(m.components.size() == 1);
  CHECK(m.components[0].size() == 4);
  for (int64_t i : {0}) CHECK(m.data[size_t(i)] == 0);
}
