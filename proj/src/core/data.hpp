#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "core/hdf5_util.hpp"
#include "core/model.hpp"

namespace celnet {

struct PatchDataset {
  int64_t n = 0, h = 0, w = 0;
  std::vector<uint8_t> images;  // n*h*w*3, 0..255
  std::vector<uint8_t> labels;  // n, binary

  void validate() const {
    CELNET_CHECK_ARG(int64_t(images.size()) == n * h * w * 3, "field 'x': size mismatch");
    CELNET_CHECK_ARG(int64_t(labels.size()) == n, "field 'y': size mismatch");
    for (uint8_t l : labels)
      CELNET_CHECK_ARG(l <= 1, "field 'y': labels must be binary, found %d", int(l));
  }

  double positive_fraction() const {
    if (n == 0) return 0.0;
    int64_t pos = 0;
    for (uint8_t l : labels) pos += l;
    return double(pos) / double(n);
  }
};

struct LocalizationDataset {
  int64_t n = 0, h = 0, w = 0;
  std::vector<uint8_t> images;  // n*h*w*3
  std::vector<uint8_t> masks;   // n*h*w, binary

  void validate() const {
    CELNET_CHECK_ARG(int64_t(images.size()) == n * h * w * 3, "field 'x': size mismatch");
    CELNET_CHECK_ARG(int64_t(masks.size()) == n * h * w, "field 'm': size mismatch");
    for (uint8_t v : masks) CELNET_CHECK_ARG(v <= 1, "field 'm': masks must be binary");
  }
};

struct SyntheticSpec {
  int64_t n_images = 1000;
  int64_t n_loc_images = 0;  // 0 -> n_images / 2
  int image_size = 96;
  int blob_count_min = 1, blob_count_max = 3;
  double blob_radius_min = 7.0, blob_radius_max = 13.0;
  double nucleus_density = 0.055;  // nuclei per px^2 inside an evidence blob
  double texture_noise_scale = 0.05;
  uint64_t seed = 1;

  void validate() const {
    CELNET_CHECK_ARG(n_images >= 2, "n_images must be >= 2");
    CELNET_CHECK_ARG(image_size >= 16, "image_size must be >= 16");
    CELNET_CHECK_ARG(blob_count_min >= 1 && blob_count_max >= blob_count_min,
                     "bad blob count range");
    CELNET_CHECK_ARG(blob_radius_min > 0 && blob_radius_max >= blob_radius_min,
                     "blob radius range must be positive");
    CELNET_CHECK_ARG(2.0 * (blob_radius_max + 2.0) < double(image_size),
                     "blob radius too large for image size");
    CELNET_CHECK_ARG(nucleus_density >= 0.0, "nucleus_density must be >= 0");
    CELNET_CHECK_ARG(texture_noise_scale >= 0.0, "texture_noise_scale must be >= 0");
  }
};

inline void to_json(json& j, const SyntheticSpec& s) {
  j = json{{"n_images", s.n_images},
           {"n_loc_images", s.n_loc_images},
           {"image_size", s.image_size},
           {"blob_count_min", s.blob_count_min},
           {"blob_count_max", s.blob_count_max},
           {"blob_radius_min", s.blob_radius_min},
           {"blob_radius_max", s.blob_radius_max},
           {"nucleus_density", s.nucleus_density},
           {"texture_noise_scale", s.texture_noise_scale},
           {"seed", s.seed}};
}
inline void from_json(const json& j, SyntheticSpec& s) {
  s = SyntheticSpec{};
  if (j.contains("n_images")) j.at("n_images").get_to(s.n_images);
  if (j.contains("n_loc_images")) j.at("n_loc_images").get_to(s.n_loc_images);
  if (j.contains("image_size")) j.at("image_size").get_to(s.image_size);
  if (j.contains("blob_count_min")) j.at("blob_count_min").get_to(s.blob_count_min);
  if (j.contains("blob_count_max")) j.at("blob_count_max").get_to(s.blob_count_max);
  if (j.contains("blob_radius_min")) j.at("blob_radius_min").get_to(s.blob_radius_min);
  if (j.contains("blob_radius_max")) j.at("blob_radius_max").get_to(s.blob_radius_max);
  if (j.contains("nucleus_density")) j.at("nucleus_density").get_to(s.nucleus_density);
  if (j.contains("texture_noise_scale")) j.at("texture_noise_scale").get_to(s.texture_noise_scale);
  if (j.contains("seed")) j.at("seed").get_to(s.seed);
}

// ---------------------------------------------------------------------------
// Synthetic histology-like rendering. Positives differ from negatives only by
// planted hypercellular blobs: elliptical regions packed with dark nuclei.
// Background texture and global brightness jitter are shared by both classes
// so mean intensity alone cannot separate them.

namespace detail {

struct RenderBuffers {
  std::vector<float> rgb;  // h*w*3 working image in [0,1]
};

inline void render_background(int size, Rng& rng, double noise_scale, std::vector<float>& rgb) {
  rgb.assign(size_t(size) * size * 3, 0.f);
  const float base_r = float(0.93 + rng.uniform(-0.03, 0.03));
  const float base_g = float(0.80 + rng.uniform(-0.04, 0.04));
  const float base_b = float(0.87 + rng.uniform(-0.03, 0.03));
  const float brightness = float(rng.uniform(-0.08, 0.08));
  // two-octave value noise
  auto lattice = [&](int cells) {
    std::vector<float> g(size_t(cells) * cells);
    for (auto& v : g) v = float(rng.uniform(-1.0, 1.0));
    return g;
  };
  const int c1 = 6, c2 = 13;
  std::vector<float> g1 = lattice(c1 + 1), g2 = lattice(c2 + 1);
  auto sample = [&](const std::vector<float>& g, int cells, double fy, double fx) {
    double y = fy * cells, x = fx * cells;
    int y0 = int(y), x0 = int(x);
    double wy = y - y0, wx = x - x0;
    const float* row0 = g.data() + y0 * (cells + 1);
    const float* row1 = g.data() + (y0 + 1) * (cells + 1);
    return (1 - wy) * ((1 - wx) * row0[x0] + wx * row0[x0 + 1]) +
           wy * ((1 - wx) * row1[x0] + wx * row1[x0 + 1]);
  };
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double fy = (y + 0.5) / size * 0.999, fx = (x + 0.5) / size * 0.999;
      double tex = 0.7 * sample(g1, c1, fy, fx) + 0.3 * sample(g2, c2, fy, fx);
      float* px = rgb.data() + (size_t(y) * size + x) * 3;
      float shade = float(brightness + noise_scale * tex);
      px[0] = base_r + shade;
      px[1] = base_g + shade * 1.15f;
      px[2] = base_b + shade * 0.9f;
    }
}

// Filled soft-edge disc in hematoxylin-ish color.
inline void render_nucleus(int size, double cy, double cx, double radius, double darkness,
                           Rng& rng, std::vector<float>& rgb) {
  const float nr = float(0.32 + rng.uniform(-0.05, 0.05));
  const float ng = float(0.20 + rng.uniform(-0.04, 0.04));
  const float nb = float(0.45 + rng.uniform(-0.05, 0.05));
  int y0 = std::max(0, int(cy - radius - 1)), y1 = std::min(size - 1, int(cy + radius + 1));
  int x0 = std::max(0, int(cx - radius - 1)), x1 = std::min(size - 1, int(cx + radius + 1));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      double d = std::hypot(y + 0.5 - cy, x + 0.5 - cx);
      if (d > radius) continue;
      double edge = std::min(1.0, (radius - d) / 0.9);
      float a = float(darkness * edge);
      float* px = rgb.data() + (size_t(y) * size + x) * 3;
      px[0] = (1 - a) * px[0] + a * nr;
      px[1] = (1 - a) * px[1] + a * ng;
      px[2] = (1 - a) * px[2] + a * nb;
    }
}

struct Ellipse {
  double cy, cx, a, b, theta;
  bool contains(double y, double x) const {
    double dy = y - cy, dx = x - cx;
    double u = std::cos(theta) * dx + std::sin(theta) * dy;
    double v = -std::sin(theta) * dx + std::cos(theta) * dy;
    return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
  }
};

// Renders one image. When `evidence` is true, plants blobs and fills `mask`
// (mask empty when nucleus_density == 0 since nothing is rendered).
inline void render_image(const SyntheticSpec& spec, Rng rng, bool evidence,
                         std::vector<float>& rgb, std::vector<uint8_t>* mask) {
  const int size = spec.image_size;
  render_background(size, rng, spec.texture_noise_scale, rgb);
  if (mask) mask->assign(size_t(size) * size, 0);
  // Sparse normal nuclei, identical distribution in both classes.
  const int n_normal = int(0.0013 * size * size);
  for (int i = 0; i < n_normal; ++i) {
    double cy = rng.uniform(0, size), cx = rng.uniform(0, size);
    render_nucleus(size, cy, cx, rng.uniform(1.4, 2.4), rng.uniform(0.35, 0.55), rng, rgb);
  }
  if (evidence) {
    const int blobs = rng.range(spec.blob_count_min, spec.blob_count_max);
    for (int bi = 0; bi < blobs; ++bi) {
      Ellipse e;
      e.a = rng.uniform(spec.blob_radius_min, spec.blob_radius_max);
      e.b = rng.uniform(spec.blob_radius_min, spec.blob_radius_max);
      const double margin = std::max(e.a, e.b) + 2.0;
      e.cy = rng.uniform(margin, size - margin);
      e.cx = rng.uniform(margin, size - margin);
      e.theta = rng.uniform(0, 3.14159265358979);
      const double area = 3.14159265358979 * e.a * e.b;
      const int n_nuclei = int(std::lround(spec.nucleus_density * area));
      for (int k = 0; k < n_nuclei; ++k) {
        // rejection-sample a point inside the ellipse
        double py, px;
        do {
          py = e.cy + rng.uniform(-e.a - e.b, e.a + e.b);
          px = e.cx + rng.uniform(-e.a - e.b, e.a + e.b);
        } while (!e.contains(py, px));
        render_nucleus(size, py, px, rng.uniform(2.0, 3.3), rng.uniform(0.75, 0.95), rng, rgb);
      }
      if (mask && n_nuclei > 0) {
        for (int y = 0; y < size; ++y)
          for (int x = 0; x < size; ++x)
            if (e.contains(y + 0.5, x + 0.5)) (*mask)[size_t(y) * size + x] = 1;
      }
    }
  }
}

inline void quantize(const std::vector<float>& rgb, uint8_t* out) {
  for (size_t i = 0; i < rgb.size(); ++i) {
    float v = std::clamp(rgb[i], 0.f, 1.f);
    out[i] = uint8_t(std::lround(v * 255.f));
  }
}

}  // namespace detail

struct SyntheticData {
  PatchDataset patches;
  LocalizationDataset localization;
};

inline SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const int size = spec.image_size;
  const int64_t n_loc = spec.n_loc_images > 0 ? spec.n_loc_images : spec.n_images / 2;
  SyntheticData out;
  out.patches.n = spec.n_images;
  out.patches.h = out.patches.w = size;
  out.patches.images.resize(size_t(spec.n_images) * size * size * 3);
  out.patches.labels.resize(size_t(spec.n_images));
  Rng root(spec.seed);
  std::vector<float> rgb;
  for (int64_t i = 0; i < spec.n_images; ++i) {
    const bool evidence = i % 2 == 1;  // alternating: every split stays balanced
    out.patches.labels[size_t(i)] = evidence ? 1 : 0;
    detail::render_image(spec, root.fork(uint64_t(i) * 2 + 11), evidence, rgb, nullptr);
    detail::quantize(rgb, out.patches.images.data() + i * size * size * 3);
  }
  out.localization.n = n_loc;
  out.localization.h = out.localization.w = size;
  out.localization.images.resize(size_t(n_loc) * size * size * 3);
  out.localization.masks.resize(size_t(n_loc) * size * size);
  std::vector<uint8_t> mask;
  for (int64_t i = 0; i < n_loc; ++i) {
    detail::render_image(spec, root.fork(0x10000000ull + uint64_t(i) * 2), true, rgb, &mask);
    detail::quantize(rgb, out.localization.images.data() + i * size * size * 3);
    std::copy(mask.begin(), mask.end(), out.localization.masks.begin() + i * size * size);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Array-archive (HDF5) container IO. Layout mirrors the public PCam release:
// uint8 'x' of shape N x H x W x 3 and uint8 'y' of shape N (trailing
// singleton dimensions accepted). 'x'/'y' may live in one file or in a
// *_x.h5 / *_y.h5 sibling pair.

inline void save_patch_dataset(const std::string& path, const PatchDataset& ds) {
  ds.validate();
  auto f = h5::create_file(path);
  h5::write_array<uint8_t>(f, "x", {hsize_t(ds.n), hsize_t(ds.h), hsize_t(ds.w), 3},
                           ds.images.data());
  h5::write_array<uint8_t>(f, "y", {hsize_t(ds.n)}, ds.labels.data());
}

inline PatchDataset load_patch_dataset(const std::string& path) {
  namespace fs = std::filesystem;
  CELNET_CHECK_IO(fs::exists(path), "dataset container not found: %s", path.c_str());
  PatchDataset ds;
  auto f = h5::open_file(path);
  auto xdims = h5::dataset_dims(f, "x");
  CELNET_CHECK_IO(xdims.size() == 4 && xdims[3] == 3,
                  "field 'x': expected N x H x W x 3 uint8 array in %s", path.c_str());
  h5::read_array<uint8_t>(f, "x", ds.images);
  ds.n = int64_t(xdims[0]);
  ds.h = int64_t(xdims[1]);
  ds.w = int64_t(xdims[2]);
  std::vector<hsize_t> ydims;
  if (h5::dataset_exists(f, "y")) {
    ydims = h5::dataset_dims(f, "y");
    h5::read_array<uint8_t>(f, "y", ds.labels);
  } else {
    // PCam pair naming: .../foo_x.h5 + .../foo_y.h5
    std::string p = path;
    auto pos = p.rfind("_x.h5");
    CELNET_CHECK_IO(pos != std::string::npos, "field 'y': missing in %s and no _y.h5 sibling",
                    path.c_str());
    p.replace(pos, 5, "_y.h5");
    CELNET_CHECK_IO(fs::exists(p), "label sibling not found: %s", p.c_str());
    auto fy = h5::open_file(p);
    ydims = h5::dataset_dims(fy, "y");
    h5::read_array<uint8_t>(fy, "y", ds.labels);
  }
  hsize_t yflat = 1;
  for (auto d : ydims) yflat *= d;
  CELNET_CHECK_IO(int64_t(yflat) == ds.n && ydims[0] == hsize_t(ds.n),
                  "field 'y': has %lld entries for %lld images", (long long)yflat,
                  (long long)ds.n);
  ds.validate();
  return ds;
}

// Resolves "<dir>/<split>.h5" first, then the PCam release naming.
inline PatchDataset load_patch_split(const std::string& dir, const std::string& split) {
  namespace fs = std::filesystem;
  fs::path simple = fs::path(dir) / (split + ".h5");
  if (fs::exists(simple)) return load_patch_dataset(simple.string());
  fs::path pcam = fs::path(dir) / ("camelyonpatch_level_2_split_" + split + "_x.h5");
  if (fs::exists(pcam)) return load_patch_dataset(pcam.string());
  fail(ErrorCode::io, strformat("no '%s' split found under %s", split.c_str(), dir.c_str()));
}

inline void save_localization_dataset(const std::string& path, const LocalizationDataset& ds) {
  ds.validate();
  auto f = h5::create_file(path);
  h5::write_array<uint8_t>(f, "x", {hsize_t(ds.n), hsize_t(ds.h), hsize_t(ds.w), 3},
                           ds.images.data());
  h5::write_array<uint8_t>(f, "m", {hsize_t(ds.n), hsize_t(ds.h), hsize_t(ds.w)},
                           ds.masks.data());
}

inline LocalizationDataset load_localization_dataset(const std::string& path) {
  LocalizationDataset ds;
  auto f = h5::open_file(path);
  auto xdims = h5::dataset_dims(f, "x");
  CELNET_CHECK_IO(xdims.size() == 4 && xdims[3] == 3, "field 'x': expected N x H x W x 3 in %s",
                  path.c_str());
  auto mdims = h5::dataset_dims(f, "m");
  CELNET_CHECK_IO(mdims.size() == 3 && mdims[0] == xdims[0] && mdims[1] == xdims[1] &&
                      mdims[2] == xdims[2],
                  "field 'm': shape does not match 'x' in %s", path.c_str());
  h5::read_array<uint8_t>(f, "x", ds.images);
  h5::read_array<uint8_t>(f, "m", ds.masks);
  ds.n = int64_t(xdims[0]);
  ds.h = int64_t(xdims[1]);
  ds.w = int64_t(xdims[2]);
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// uint8 -> [0,1] float tensors.

template <typename T>
void image_to_tensor(const uint8_t* src, int64_t h, int64_t w, Tensor<T>& out, int64_t slot) {
  T* dst = out.image(slot);
  const int64_t count = h * w * 3;
  for (int64_t i = 0; i < count; ++i) dst[i] = T(src[i]) / T(255);
}

template <typename T>
Tensor<T> single_image_tensor(const std::vector<uint8_t>& images, int64_t h, int64_t w,
                              int64_t index) {
  Tensor<T> t(1, h, w, 3);
  image_to_tensor(images.data() + index * h * w * 3, h, w, t, 0);
  return t;
}

}  // namespace celnet
