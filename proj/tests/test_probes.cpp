#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "sandpile/green.hpp"
#include "sandpile/probes.hpp"

using namespace sandpile;

namespace {

// sup_x |F_a(x) - F_b(x)| evaluated at every sample point by direct counting.
double brute_force_ks(const std::vector<double>& a, const std::vector<double>& b) {
  auto ecdf = [](const std::vector<double>& v, double x) {
    return static_cast<double>(std::count_if(v.begin(), v.end(), [&](double y) { return y <= x; })) /
           static_cast<double>(v.size());
  };
  double worst = 0.0;
  for (const auto* v : {&a, &b}) {
    for (double x : *v) worst = std::max(worst, std::abs(ecdf(a, x) - ecdf(b, x)));
  }
  return worst;
}

// Truncated second moment of the symmetric Pareto law with scale s.
double pareto_second_moment(double alpha, double s, double x) {
  if (x < s) return 0.0;
  return alpha * std::pow(s, alpha) * (std::pow(x, 2.0 - alpha) - std::pow(s, 2.0 - alpha)) / (2.0 - alpha);
}

}  // namespace

TEST_CASE("KS statistic") {
  CHECK(ks_statistic({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}) == 0.0);
  CHECK(ks_statistic({1.0, 2.0}, {5.0, 6.0}) == 1.0);
  CHECK(ks_statistic({1.0, 2.0, 3.0}, {2.5}) == doctest::Approx(2.0 / 3.0));
  CHECK_THROWS(ks_statistic({}, {1.0}));
  RandomStream s(3, "ks-test");
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(1 + s.below(40));
    std::vector<double> b(1 + s.below(40));
    for (auto& x : a) x = std::floor(10.0 * s.uniform());
    for (auto& x : b) x = std::floor(12.0 * s.uniform());
    CHECK(ks_statistic(a, b) == doctest::Approx(brute_force_ks(a, b)).epsilon(1e-14));
  }
}

TEST_CASE("coefficient sequences") {
  const auto power = coefficient_sequence("power:2", 5);
  REQUIRE(power.size() == 5);
  CHECK(power[0] == 1.0);
  CHECK(power[3] == doctest::Approx(1.0 / 16.0));
  const auto green = coefficient_sequence("green:3", 8);
  CHECK(green[0] == doctest::Approx(1.516386059151978).epsilon(1e-9));
  const LatticeGreen g(3);
  const auto points = shell_enumeration(3, 8);
  for (std::size_t j = 0; j < 8; ++j) CHECK(green[j] == doctest::Approx(g(points[j])));
  CHECK_THROWS(coefficient_sequence("geometric:2", 5));
  CHECK_THROWS(coefficient_sequence("power", 5));
}

TEST_CASE("tail bound thresholds satisfy their defining inequalities") {
  for (double s : {0.5, 1.0, 2.0}) {
    const HeavyTailLaw law = HeavyTailLaw::pareto(1.5, s);
    const std::vector<double> c = coefficient_sequence("power:2", 2000);
    const std::vector<double> margins{4.0};
    const TailBoundReport r = tail_bound_check(c, law, 1.2, margins, 10, 1);
    for (double x = r.x1; x < 100.0 * r.x1; x *= 1.1) {
      CHECK(1.0 - cdf(law, x) + cdf(law, -x) <= 0.5 * std::pow(x, -1.2) * (1.0 + 1e-12));
    }
    for (double x = std::max(r.x2, s) * 1.0001; x < 100.0 * std::max(r.x2, 1.0); x *= 1.1) {
      CHECK(pareto_second_moment(1.5, s, x) <= 0.5 * std::pow(x, 0.8));
    }
    if (r.x2 > s) CHECK(pareto_second_moment(1.5, s, r.x2 * 0.99) > 0.5 * std::pow(r.x2 * 0.99, 0.8));
  }
}

TEST_CASE("n1 is the first index meeting both conditions") {
  const std::vector<double> c = coefficient_sequence("power:2", 20000);
  const std::vector<double> margins{2.0, 16.0};
  const TailBoundReport r = tail_bound_check(c, HeavyTailLaw::pareto(1.5), 1.2, margins, 10, 1);
  const double threshold = std::max(r.x1, r.x2);
  auto ok = [&](long n1, double m) {
    double tail = 0.0;
    double largest = 0.0;
    for (std::size_t j = static_cast<std::size_t>(n1 - 1); j < c.size(); ++j) {
      tail += std::pow(c[j], 1.2);
      largest = std::max(largest, c[j]);
    }
    return tail < std::pow(1.0 / m, 2.4) && largest <= std::min(1.0, 1.0 / (m * threshold));
  };
  for (const auto& row : r.rows) {
    REQUIRE(row.n1 > 1);
    CHECK(ok(row.n1, row.margin));
    CHECK_FALSE(ok(row.n1 - 1, row.margin));
  }
}

TEST_CASE("finitely supported coefficients give probability zero") {
  std::vector<double> c(100, 0.0);
  c[0] = 1.0;
  c[1] = 0.5;
  const std::vector<double> margins{2.0, 4.0};
  const TailBoundReport r = tail_bound_check(c, HeavyTailLaw::pareto(1.5), 1.2, margins, 200, 2);
  for (const auto& row : r.rows) {
    CHECK(row.n1 > 2);
    CHECK(row.probability == 0.0);
  }
}

TEST_CASE("tail bound probabilities fall once the summability condition binds") {
  const std::vector<double> c = coefficient_sequence("power:2", 10000);
  const std::vector<double> margins{16.0, 32.0, 64.0};
  const TailBoundReport r = tail_bound_check(c, HeavyTailLaw::pareto(1.5), 1.2, margins, 4000, 8);
  REQUIRE(r.rows.size() == 3);
  CHECK(r.rows[0].probability > r.rows[1].probability);
  CHECK(r.rows[1].probability >= r.rows[2].probability);
  for (const auto& row : r.rows) CHECK(row.probability <= row.bound + 1e-15);
  CHECK(r.exponent > 0.0);
}

TEST_CASE("tail bound rejects unsupported inputs") {
  const std::vector<double> c{1.0, 0.25};
  const std::vector<double> m{2.0};
  CHECK_THROWS(tail_bound_check(c, HeavyTailLaw::pareto(1.5), 1.6, m, 10, 1));
  CHECK_THROWS(tail_bound_check(c, HeavyTailLaw::stable(1.5), 1.2, m, 10, 1));
  CHECK_THROWS(tail_bound_check(c, HeavyTailLaw::pareto(2.0), 1.2, m, 10, 1));
}

TEST_CASE("v_e series probe") {
  const std::vector<long> truncations{20, 40, 80};
  const std::vector<double> margins{0.5, 1.0, 4.0};
  const VeSeriesProbe p = ve_series_probe(3, HeavyTailLaw::stable(1.5), truncations, 300, margins, 4);
  REQUIRE(p.rows.size() == 3);
  for (const auto& row : p.rows) {
    CHECK(std::is_sorted(row.quantiles.begin(), row.quantiles.end()));
    CHECK(row.left_tail[0] >= row.left_tail[1]);
    CHECK(row.left_tail[1] >= row.left_tail[2]);
    CHECK(row.ks >= 0.0);
    CHECK(row.ks <= 1.0);
  }
  const VeSeriesProbe again = ve_series_probe(3, HeavyTailLaw::stable(1.5), truncations, 300, margins, 4);
  CHECK(again.rows[2].quantiles == p.rows[2].quantiles);
  CHECK_THROWS(ve_series_probe(2, HeavyTailLaw::stable(1.5), truncations, 300, margins, 4));
}

TEST_CASE("v_e series with a point law is deterministic") {
  const std::vector<long> truncations{10};
  const std::vector<double> margins{1.0};
  const VeSeriesProbe p = ve_series_probe(3, HeavyTailLaw::point().shifted(1.0), truncations, 10, margins, 1);
  // v_N = (2d)^{-1} sum_{j <= N} g(o, y_j).
  const LatticeGreen g(3);
  double expected = 0.0;
  for (const auto& y : shell_enumeration(3, 10)) expected += g(y);
  expected /= 6.0;
  CHECK(p.rows[0].quantiles[3] == doctest::Approx(expected).epsilon(1e-12));
  // v_N and v_2N are distinct point masses.
  CHECK(p.rows[0].ks == 1.0);
}
