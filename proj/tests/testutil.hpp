#pragma once

#include <cmath>
#include <functional>

#include "core/common.hpp"
#include "core/tensor.hpp"

namespace celtest {

template <typename T>
void fill_random(celnet::Tensor<T>& t, celnet::Rng& rng, double lo = -1.0, double hi = 1.0) {
  for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = T(rng.uniform(lo, hi));
}

// Central finite difference of a scalar function w.r.t. one tensor entry.
template <typename T>
double central_diff(celnet::Tensor<T>& x, int64_t idx, double eps,
                    const std::function<double()>& eval) {
  const T saved = x.data()[idx];
  x.data()[idx] = T(double(saved) + eps);
  double up = eval();
  x.data()[idx] = T(double(saved) - eps);
  double down = eval();
  x.data()[idx] = saved;
  return (up - down) / (2.0 * eps);
}

inline double rel_err(double got, double want) {
  double denom = std::max(std::abs(want), 1e-8);
  return std::abs(got - want) / denom;
}

// Relative error with a magnitude floor: entries whose analytic and numeric
// values are both tiny are treated as matching.
inline double rel_err_floored(double got, double want, double floor_mag) {
  if (std::abs(got) < floor_mag && std::abs(want) < floor_mag) return 0.0;
  return std::abs(got - want) / std::max({std::abs(got), std::abs(want), floor_mag});
}

}  // namespace celtest
