#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

#include "sandpile/stable_laws.hpp"

using namespace sandpile;
using std::numbers::pi;

namespace {

// F(x) = 1/2 + (1/pi) int_0^inf sin(tx) exp(-t^alpha) / t dt by composite Simpson.
// On [0, 1] the substitution t = s^6 removes the t^alpha kink at the origin.
double simpson(const std::function<double(double)>& g, double a, double b, int panels) {
  const double h = (b - a) / panels;
  double sum = g(a) + g(b);
  for (int i = 1; i < panels; ++i) sum += (i % 2 ? 4.0 : 2.0) * g(a + i * h);
  return sum * h / 3.0;
}

double fourier_cdf(double alpha, double x) {
  const double T = std::max(1.0, std::pow(40.0, 1.0 / alpha));
  auto inner = [&](double s) {
    if (s == 0.0) return 0.0;
    const double t = std::pow(s, 6);
    return 6.0 * std::sin(t * x) * std::exp(-std::pow(t, alpha)) / s;
  };
  auto outer = [&](double t) { return std::sin(t * x) * std::exp(-std::pow(t, alpha)) / t; };
  const int panels = 2 * static_cast<int>(std::ceil(200.0 * T * (1.0 + std::abs(x))));
  return 0.5 + (simpson(inner, 0.0, 1.0, 20000) + simpson(outer, 1.0, T, panels)) / pi;
}

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double one_sample_ks(std::vector<double> xs, const HeavyTailLaw& law) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double F = cdf(law, xs[i]);
    worst = std::max({worst, std::abs(F - i / n), std::abs(F - (i + 1) / n)});
  }
  return worst;
}

}  // namespace

TEST_CASE("law kinds parse and print") {
  CHECK(parse_law_kind("sas") == LawKind::Stable);
  CHECK(parse_law_kind("stable") == LawKind::Stable);
  CHECK(parse_law_kind("normal") == LawKind::Gaussian);
  CHECK(parse_law_kind("pareto") == LawKind::Pareto);
  CHECK(parse_law_kind(to_string(LawKind::Point)) == LawKind::Point);
  CHECK_THROWS_AS(parse_law_kind("levy"), std::invalid_argument);
}

TEST_CASE("law validation") {
  CHECK_THROWS(HeavyTailLaw::stable(0.0).validate());
  CHECK_THROWS(HeavyTailLaw::stable(2.5).validate());
  CHECK_THROWS(HeavyTailLaw::pareto(1.5, -1.0).validate());
  CHECK_NOTHROW(HeavyTailLaw::stable(2.0).validate());
  CHECK_THROWS(StableDistribution(1.005));
  CHECK(StableDistribution(1.5).knot_count() == 8192);
}

TEST_CASE("stable CDF agrees with Fourier inversion") {
  for (double alpha : {0.7, 1.3, 1.5, 1.8}) {
    for (double x : {-6.0, -2.0, -0.5, 0.0, 0.3, 1.0, 2.5, 8.0}) {
      CHECK(cdf(HeavyTailLaw::stable(alpha), x) == doctest::Approx(fourier_cdf(alpha, x)).epsilon(1e-9));
    }
  }
}

TEST_CASE("stable CDF closed forms at alpha = 1 and 2") {
  for (double x : {-30.0, -1.0, 0.0, 0.4, 5.0}) {
    CHECK(cdf(HeavyTailLaw::stable(1.0), x) == doctest::Approx(0.5 + std::atan(x) / pi).epsilon(1e-12));
    CHECK(cdf(HeavyTailLaw::stable(2.0), x) == doctest::Approx(std_normal_cdf(x / std::sqrt(2.0))).epsilon(1e-12));
    CHECK(cdf(HeavyTailLaw::stable(1.0, 2.0), 2.0 * x) == doctest::Approx(0.5 + std::atan(x) / pi).epsilon(1e-12));
  }
}

TEST_CASE("stable tails follow C x^-alpha with the classical constant") {
  for (double alpha : {1.2, 1.5, 1.9}) {
    const auto law = stable_distribution(alpha);
    const double C = std::tgamma(alpha) * std::sin(pi * alpha / 2.0) / pi;
    CHECK(law->tail_constant() == doctest::Approx(C).epsilon(1e-12));
    const double x = 1e4;
    CHECK(law->upper_tail(x) == doctest::Approx(C * std::pow(x, -alpha)).epsilon(1e-3));
    CHECK(law->density_at_zero() == doctest::Approx(std::tgamma(1.0 + 1.0 / alpha) / pi).epsilon(1e-12));
  }
}

TEST_CASE("stable upper tail is accurate far out") {
  const auto law = stable_distribution(1.5);
  CHECK(law->upper_tail(3.0) == doctest::Approx(1.0 - fourier_cdf(1.5, 3.0)).epsilon(1e-7));
  CHECK(law->upper_tail(1e6) > 0.0);
  CHECK(law->upper_tail(1e6) < law->upper_tail(1e5));
}

TEST_CASE("quantile inverts the CDF") {
  for (const auto& law : {HeavyTailLaw::stable(1.5), HeavyTailLaw::stable(1.2, 0.5), HeavyTailLaw::stable(1.0),
                          HeavyTailLaw::stable(2.0), HeavyTailLaw::gaussian(3.0)}) {
    for (double p = 0.001; p < 1.0; p += 0.0317) {
      CHECK(cdf(law, quantile(law, p)) == doctest::Approx(p).epsilon(1e-9));
    }
  }
}

TEST_CASE("quantile consistency on random alpha and p") {
  RandomStream s(2024, "quantile-property");
  for (int trial = 0; trial < 4; ++trial) {
    const double alpha = 1.05 + 0.95 * s.uniform();
    const HeavyTailLaw law = HeavyTailLaw::stable(alpha, 0.5 + s.uniform());
    const double p = kQuantileTableLow + (kQuantileTableHigh - kQuantileTableLow) * s.uniform();
    CHECK(cdf(law, quantile(law, p)) == doctest::Approx(p).epsilon(1e-9));
    CHECK_FALSE(quantile_clipped(law, p));
  }
}

TEST_CASE("quantile outside the table uses the tail form") {
  const HeavyTailLaw law = HeavyTailLaw::stable(1.5);
  CHECK(quantile_clipped(law, 1e-6));
  CHECK(quantile_clipped(law, 1.0 - 1e-6));
  const double C = std::tgamma(1.5) * std::sin(pi * 0.75) / pi;
  CHECK(quantile(law, 1.0 - 1e-6) == doctest::Approx(std::pow(C / 1e-6, 1.0 / 1.5)).epsilon(1e-3));
  CHECK(quantile(law, 1e-6) == doctest::Approx(-quantile(law, 1.0 - 1e-6)));
}

TEST_CASE("symmetric Pareto distribution function and quantile") {
  const HeavyTailLaw law = HeavyTailLaw::pareto(1.5);
  CHECK(cdf(law, 0.0) == doctest::Approx(0.5));
  CHECK(cdf(law, 0.99) == doctest::Approx(0.5));
  CHECK(cdf(law, 4.0) == doctest::Approx(1.0 - 0.5 / 8.0));
  CHECK(cdf(law, -4.0) == doctest::Approx(0.5 / 8.0));
  CHECK(quantile(law, 0.9375) == doctest::Approx(4.0));
  CHECK(quantile(law, 0.0625) == doctest::Approx(-4.0));
  // Left-continuous inverse: the flat part of F at level 1/2 maps to its left end.
  CHECK(quantile(law, 0.5) == doctest::Approx(-1.0));
  CHECK(quantile(HeavyTailLaw::pareto(1.5, 2.0), 0.9375) == doctest::Approx(8.0));
}

TEST_CASE("shift translates distribution and quantile") {
  const HeavyTailLaw base = HeavyTailLaw::stable(1.7);
  const HeavyTailLaw moved = base.shifted(2.0);
  CHECK_FALSE(moved.symmetric());
  CHECK(cdf(moved, 2.5) == doctest::Approx(cdf(base, 0.5)));
  CHECK(quantile(moved, 0.8) == doctest::Approx(quantile(base, 0.8) + 2.0));
}

TEST_CASE("samplers match their distribution functions") {
  for (const auto& law : {HeavyTailLaw::stable(1.5), HeavyTailLaw::stable(0.8, 2.0), HeavyTailLaw::stable(1.0),
                          HeavyTailLaw::stable(2.0), HeavyTailLaw::pareto(1.5), HeavyTailLaw::gaussian(0.5)}) {
    RandomStream stream(77, "ks-sampler");
    const RealField v = sample_field(law, stream, 20000);
    const double ks = one_sample_ks(std::vector<double>(v.data(), v.data() + v.size()), law);
    CHECK(ks < 1.95 / std::sqrt(20000.0));
  }
}

TEST_CASE("point law samples zero and shift adds a constant") {
  RandomStream stream(1, "point");
  CHECK(sample(HeavyTailLaw::point(), stream) == 0.0);
  CHECK(sample(HeavyTailLaw::point().shifted(0.25), stream) == 0.25);
}

TEST_CASE("sampling is reproducible from the stream") {
  RandomStream a(5, "repro");
  RandomStream b(5, "repro");
  const RealField x = sample_field(HeavyTailLaw::stable(1.3), a, 100);
  const RealField y = sample_field(HeavyTailLaw::stable(1.3), b, 100);
  CHECK((x - y).abs().maxCoeff() == 0.0);
}

TEST_CASE("characteristic functions") {
  CHECK(characteristic_function(HeavyTailLaw::stable(1.5, 2.0), 0.5).real() ==
        doctest::Approx(std::exp(-1.0)));
  CHECK(characteristic_function(HeavyTailLaw::gaussian(2.0), 1.0).real() == doctest::Approx(std::exp(-2.0)));
  const auto shifted = characteristic_function(HeavyTailLaw::point().shifted(1.0), pi / 2.0);
  CHECK(shifted.imag() == doctest::Approx(1.0));
  CHECK_THROWS(characteristic_function(HeavyTailLaw::pareto(1.5), 1.0));
}

TEST_CASE("empirical CF of SaS samples matches the closed form") {
  RandomStream stream(3, "ecf");
  const RealField v = sample_field(HeavyTailLaw::stable(1.5), stream, 100000);
  const std::vector<double> thetas{0.25, 0.5, 1.0, 2.0};
  const auto est = empirical_cf(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())), thetas);
  for (const auto& e : est) {
    CHECK(e.stderr_ == doctest::Approx(1.0 / std::sqrt(100000.0)));
    CHECK(std::abs(e.value - std::exp(-std::pow(e.theta, 1.5))) < 4.0 * e.stderr_);
  }
  CHECK(fit_stable_scale(est, 1.5) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("normal quantile") {
  for (double p : {1e-10, 1e-4, 0.02, 0.3, 0.5, 0.77, 0.999}) {
    CHECK(std_normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-12));
  }
}

TEST_CASE("Pareto normalized sums approach the attraction scale") {
  const HeavyTailLaw law = HeavyTailLaw::pareto(1.5);
  const double c = attraction_scale(law);
  CHECK(c == doctest::Approx(std::pow(std::tgamma(-0.5) * std::cos(0.75 * pi), 1.0 / 1.5)));
  const std::vector<long> ks{2000};
  const std::vector<double> thetas{0.2, 0.4, 0.6, 0.8};
  const auto probe = normalized_sum_probe(law, ks, 4000, thetas, 11);
  CHECK(probe.rows.front().fitted_scale == doctest::Approx(c).epsilon(0.05));
  CHECK(attraction_scale(HeavyTailLaw::pareto(1.0)) == doctest::Approx(pi / 2.0));
  CHECK(attraction_scale(HeavyTailLaw::gaussian(2.0)) == doctest::Approx(std::sqrt(2.0)));
}
