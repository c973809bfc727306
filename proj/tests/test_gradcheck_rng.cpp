#include <cmath>
#include <limits>
#include <set>

#include "codh/gradcheck.hpp"
#include "codh/rng.hpp"
#include "doctest.h"

using namespace codh;

TEST_CASE("finite_diff_check on a sum of squares") {
  const Tensord x({2}, {1, 2});
  auto f = [](const Tensord& p) { return p.values().squaredNorm(); };
  const CheckReport r = finite_diff_check(f, x, Tensord({2}, {2, 4}), 1e-5, 1e-4);
  CHECK(r.pass);
  CHECK(r.max_rel_err_raw < 1e-9);
  CHECK(r.coordinates == 2);
}

TEST_CASE("finite_diff_check rejects a wrong gradient") {
  const Tensord x({3}, {0.3, -1.2, 2.0});
  auto f = [](const Tensord& p) { return std::sin(p[0]) + p[1] * p[2]; };
  const Tensord right({3}, {std::cos(0.3), 2.0, -1.2});
  CHECK(finite_diff_check(f, x, right, 1e-5, 1e-6).pass);
  Tensord wrong = right;
  wrong[2] *= 1.001;
  const CheckReport r = finite_diff_check(f, x, wrong, 1e-5, 1e-4);
  CHECK_FALSE(r.pass);
  CHECK(r.worst_index == 2);
  CHECK(r.max_rel_err == doctest::Approx(1e-3).epsilon(0.01));
}

TEST_CASE("finite_diff_check treats tiny absolute differences as exact") {
  const Tensord x({1}, {1});
  auto f = [](const Tensord&) { return 0.0; };
  CHECK(finite_diff_check(f, x, Tensord({1}, {5e-9}), 1e-5, 1e-4).pass);
  CHECK_FALSE(finite_diff_check(f, x, Tensord({1}, {5e-8}), 1e-5, 1e-4).pass);
}

TEST_CASE("finite_diff_check errors and NaN") {
  const Tensord x({2}, {1, 2});
  auto f = [](const Tensord& p) { return p[0]; };
  CHECK_THROWS_WITH_AS(finite_diff_check(f, x, x, 0.0, 1e-4), "degenerate step", std::invalid_argument);
  CHECK_THROWS_AS(finite_diff_check(f, x, Tensord({3}), 1e-5, 1e-4), ShapeError);
  const Tensord nan({2}, {std::numeric_limits<double>::quiet_NaN(), 0});
  const CheckReport r = finite_diff_check(f, x, nan, 1e-5, 1e-4);
  CHECK_FALSE(r.pass);
  CHECK(r.worst_index == 0);
  CHECK(std::isnan(r.max_rel_err));
}

TEST_CASE("counter rng streams") {
  const auto a = CounterRng::stream(0, "rois");
  CHECK(a.bits(17) == CounterRng::stream(0, "rois").bits(17));
  CHECK(a.bits(17) != CounterRng::stream(1, "rois").bits(17));
  CHECK(a.bits(17) != CounterRng::stream(0, "rois2").bits(17));

  // Draw order cannot matter: element i is a pure function of (key, i).
  const Tensord fwd = normal_tensor({1000}, a);
  for (Index i = 999; i >= 0; i -= 37) CHECK(fwd[i] == a.normal(static_cast<std::uint64_t>(i)));

  double mean = 0, var = 0;
  for (Index i = 0; i < fwd.size(); ++i) mean += fwd[i];
  mean /= 1000;
  for (Index i = 0; i < fwd.size(); ++i) var += (fwd[i] - mean) * (fwd[i] - mean);
  var /= 999;
  CHECK(std::abs(mean) < 0.15);
  CHECK(std::abs(var - 1) < 0.15);

  const Tensord u = uniform_tensor({1000}, a, 0.25);
  CHECK(u.values().maxCoeff() < 0.25);
  CHECK(u.values().minCoeff() >= -0.25);
  std::set<double> distinct(u.data(), u.data() + u.size());
  CHECK(distinct.size() == 1000);
}
