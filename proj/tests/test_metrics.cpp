#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "core/metrics.hpp"
#include "testutil.hpp"

using namespace celnet;

namespace {

// O(n^2) Mann-Whitney pair counting, ties worth one half.
double mann_whitney_auc(const std::vector<double>& s, const std::vector<uint8_t>& y) {
  double num = 0;
  int64_t pairs = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      ++pairs;
      if (s[i] > s[j]) num += 1.0;
      else if (s[i] == s[j]) num += 0.5;
    }
  }
  return num / double(pairs);
}

}  // namespace

TEST_CASE("perfectly separated scores give AUC 1 and accuracy 1") {
  std::vector<double> s = {0.9, 0.8, 0.2, 0.1};
  std::vector<uint8_t> y = {1, 1, 0, 0};
  auto auc = roc_auc(s, y);
  REQUIRE(auc.has_value());
  CHECK(*auc == doctest::Approx(1.0));
  CHECK(accuracy(s, y) == 1.0);
}

TEST_CASE("identical scores give AUC 0.5") {
  std::vector<double> s = {0.4, 0.4, 0.4, 0.4, 0.4};
  std::vector<uint8_t> y = {1, 0, 1, 0, 1};
  auto auc = roc_auc(s, y);
  REQUIRE(auc.has_value());
  CHECK(*auc == doctest::Approx(0.5));
}

TEST_CASE("single-class input has no AUC") {
  std::vector<double> s = {0.4, 0.6};
  std::vector<uint8_t> y = {1, 1};
  CHECK_FALSE(roc_auc(s, y).has_value());
}

TEST_CASE("hand-listed 10-pair case matches pairwise counting") {
  std::vector<double> s = {0.95, 0.9, 0.8, 0.7, 0.7, 0.6, 0.4, 0.3, 0.2, 0.1};
  std::vector<uint8_t> y = {1, 0, 1, 1, 0, 0, 1, 0, 1, 0};
  auto auc = roc_auc(s, y);
  REQUIRE(auc.has_value());
  CHECK(std::abs(*auc - mann_whitney_auc(s, y)) < 1e-12);
}

TEST_CASE("trapezoidal AUC equals Mann-Whitney on random score sets") {
  Rng rng(55);
  for (int trial = 0; trial < 30; ++trial) {
    size_t n = 10 + rng.below(990);
    std::vector<double> s(n);
    std::vector<uint8_t> y(n);
    bool quantize = trial % 3 == 0;  // force plenty of ties on some trials
    for (size_t i = 0; i < n; ++i) {
      double v = rng.uniform();
      s[i] = quantize ? std::floor(v * 8.0) / 8.0 : v;
      y[i] = rng.uniform() < 0.4 ? 1 : 0;
    }
    y[0] = 1;
    y[1] = 0;  // both classes present
    auto auc = roc_auc(s, y);
    REQUIRE(auc.has_value());
    CHECK(std::abs(*auc - mann_whitney_auc(s, y)) < 1e-9);
  }
}

TEST_CASE("accuracy uses the 0.5 probability threshold inclusively") {
  std::vector<double> s = {0.5, 0.49};
  std::vector<uint8_t> y = {1, 0};
  CHECK(accuracy(s, y) == 1.0);
}
