#pragma once

#include <optional>
#include <vector>

#include "core/explain.hpp"

namespace celnet {

struct GroundTruthMask {
  int64_t h = 0, w = 0;
  std::vector<uint8_t> data;  // 1 = tumor, 0 = normal

  void validate() const {
    CELNET_CHECK_ARG(int64_t(data.size()) == h * w, "ground-truth mask size mismatch");
    for (uint8_t v : data) CELNET_CHECK_ARG(v <= 1, "ground-truth mask must be binary");
  }
};

struct EvidenceMask {
  int64_t h = 0, w = 0;
  std::vector<uint8_t> data;                      // 1 = evidence
  std::vector<std::vector<int64_t>> components;   // 8-connected, row-major pixel indices
};

enum class ComponentClass { true_positive, false_positive, neither };

struct LocalizationTally {
  int64_t tp = 0, fp = 0, neither = 0;
  int64_t gt_regions_hit = 0, gt_regions_total = 0;
};

struct LocalizationScore {
  std::optional<double> precision;  // absent when tp + fp == 0
  std::optional<double> recall;     // absent when there are no ground-truth regions
  LocalizationTally tally;
};

// 8-connected components in scan order (deterministic).
inline std::vector<std::vector<int64_t>> connected_components(int64_t h, int64_t w,
                                                              const std::vector<uint8_t>& grid) {
  std::vector<std::vector<int64_t>> comps;
  std::vector<uint8_t> seen(size_t(h * w), 0);
  std::vector<int64_t> stack;
  for (int64_t start = 0; start < h * w; ++start) {
    if (!grid[size_t(start)] || seen[size_t(start)]) continue;
    std::vector<int64_t> comp;
    stack.assign(1, start);
    seen[size_t(start)] = 1;
    while (!stack.empty()) {
      int64_t p = stack.back();
      stack.pop_back();
      comp.push_back(p);
      int64_t y = p / w, x = p % w;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (!dy && !dx) continue;
          int64_t yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
          int64_t q = yy * w + xx;
          if (grid[size_t(q)] && !seen[size_t(q)]) {
            seen[size_t(q)] = 1;
            stack.push_back(q);
          }
        }
    }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }
  return comps;
}

inline EvidenceMask make_mask(int64_t h, int64_t w, std::vector<uint8_t> grid,
                              int64_t min_area = 1) {
  EvidenceMask m;
  m.h = h;
  m.w = w;
  auto all = connected_components(h, w, grid);
  m.data.assign(size_t(h * w), 0);
  for (auto& comp : all) {
    if (int64_t(comp.size()) < min_area) continue;
    for (int64_t p : comp) m.data[size_t(p)] = 1;
    m.components.push_back(std::move(comp));
  }
  return m;
}

// Threshold is relative: a pixel is evidence when the smoothed value reaches
// threshold * (smoothed map maximum). Components under min_area are dropped.
template <typename T>
EvidenceMask map_to_mask(const Tensor<T>& map, double threshold, double smooth_sigma,
                         int64_t min_area) {
  CELNET_CHECK_ARG(map.n() == 1 && map.c() == 1, "map_to_mask expects a (1,h,w,1) map");
  for (int64_t i = 0; i < map.size(); ++i)
    CELNET_CHECK_ARG(std::isfinite(double(map.data()[i])), "map contains non-finite values");
  CELNET_CHECK_ARG(threshold >= 0.0, "threshold must be nonnegative");
  Tensor<T> sm = smooth_sigma > 0.0 ? gaussian_blur(map, smooth_sigma) : map;
  T top = max_value(sm);
  const int64_t h = map.h(), w = map.w();
  std::vector<uint8_t> grid(size_t(h * w), 0);
  if (top > T(0)) {
    const double cut = threshold * double(top);
    for (int64_t i = 0; i < h * w; ++i) grid[size_t(i)] = double(sm.data()[i]) >= cut ? 1 : 0;
  }
  return make_mask(h, w, std::move(grid), min_area);
}

// Two-sided 75% rule: TP when >=75% of the component lies on tumor, FP when
// >=75% lies on normal tissue, NEITHER otherwise. Integer arithmetic keeps
// the boundary exact.
inline ComponentClass classify_component(const std::vector<int64_t>& component,
                                         const GroundTruthMask& gt) {
  CELNET_CHECK_ARG(!component.empty(), "cannot classify an empty component");
  int64_t in_tumor = 0;
  for (int64_t p : component) {
    CELNET_CHECK_ARG(p >= 0 && p < gt.h * gt.w, "component pixel outside mask bounds");
    in_tumor += gt.data[size_t(p)] ? 1 : 0;
  }
  const int64_t area = int64_t(component.size());
  if (4 * in_tumor >= 3 * area) return ComponentClass::true_positive;
  if (4 * (area - in_tumor) >= 3 * area) return ComponentClass::false_positive;
  return ComponentClass::neither;
}

// Precision over TP/FP components (NEITHER excluded); recall over
// ground-truth tumor regions hit by at least one TP component.
inline LocalizationScore score_dataset(const std::vector<EvidenceMask>& masks,
                                       const std::vector<GroundTruthMask>& gts) {
  CELNET_CHECK_ARG(masks.size() == gts.size(), "masks/ground truth lists must align");
  LocalizationScore r;
  for (size_t i = 0; i < masks.size(); ++i) {
    const auto& gt = gts[i];
    CELNET_CHECK_ARG(masks[i].h == gt.h && masks[i].w == gt.w, "mask %zu shape mismatch", i);
    auto gt_comps = connected_components(gt.h, gt.w, gt.data);
    r.tally.gt_regions_total += int64_t(gt_comps.size());
    std::vector<uint8_t> hit(gt_comps.size(), 0);
    // Label map for overlap lookups.
    std::vector<int32_t> label(size_t(gt.h * gt.w), -1);
    for (size_t g = 0; g < gt_comps.size(); ++g)
      for (int64_t p : gt_comps[g]) label[size_t(p)] = int32_t(g);
    for (const auto& comp : masks[i].components) {
      switch (classify_component(comp, gt)) {
        case ComponentClass::true_positive:
          r.tally.tp++;
          for (int64_t p : comp)
            if (label[size_t(p)] >= 0) hit[size_t(label[size_t(p)])] = 1;
          break;
        case ComponentClass::false_positive:
          r.tally.fp++;
          break;
        case ComponentClass::neither:
          r.tally.neither++;
          break;
      }
    }
    for (uint8_t hflag : hit) r.tally.gt_regions_hit += hflag;
  }
  if (r.tally.tp + r.tally.fp > 0)
    r.precision = double(r.tally.tp) / double(r.tally.tp + r.tally.fp);
  if (r.tally.gt_regions_total > 0)
    r.recall = double(r.tally.gt_regions_hit) / double(r.tally.gt_regions_total);
  return r;
}

}  // namespace celnet
