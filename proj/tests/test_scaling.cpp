#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <numbers>

#include "sandpile/green.hpp"
#include "sandpile/sandpile.hpp"
#include "sandpile/scaling.hpp"

using namespace sandpile;

namespace {

constexpr double kPi = std::numbers::pi;

// int_0^1 |cos 2 pi x|^alpha dx.
double cos_moment(double alpha) {
  return std::tgamma((alpha + 1.0) / 2.0) / (std::sqrt(kPi) * std::tgamma(alpha / 2.0 + 1.0));
}

// Midpoint rule on [0,1]^d with `m` points per axis.
double midpoint(int d, int m, const std::function<double(double, double)>& g) {
  double acc = 0.0;
  const double h = 1.0 / m;
  if (d == 1) {
    for (int i = 0; i < m; ++i) acc += g((i + 0.5) * h, 0.0);
    return acc * h;
  }
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) acc += g((i + 0.5) * h, (j + 0.5) * h);
  }
  return acc * h * h;
}

// Composite Simpson on [a, b] with 2k panels.
double simpson(double a, double b, int k, const std::function<double(double)>& g) {
  const int panels = 2 * k;
  const double h = (b - a) / panels;
  double acc = g(a) + g(b);
  for (int i = 1; i < panels; ++i) acc += (i % 2 ? 4.0 : 2.0) * g(a + i * h);
  return acc * h / 3.0;
}

}  // namespace

TEST_CASE("test function parsing and conjugate closure") {
  const TestFunction f = TestFunction::parse(2, "1,0:0.5;0,2:0.25,0.1");
  CHECK(f.modes().size() == 4);
  Coord z(2);
  z << -1, 0;
  CHECK(f.coefficient(z) == std::complex<double>(0.5, 0.0));
  z << 0, -2;
  CHECK(f.coefficient(z) == std::complex<double>(0.25, -0.1));
  z << 3, 3;
  CHECK(f.coefficient(z) == 0.0);
  CHECK(f.support_radius() == 2);
  Eigen::VectorXd x(2);
  x << 0.1, 0.3;
  const double expected = std::cos(2 * kPi * 0.1) + 0.5 * std::cos(4 * kPi * 0.3) - 0.2 * std::sin(4 * kPi * 0.3);
  CHECK(f(x) == doctest::Approx(expected).epsilon(1e-13));
  CHECK(TestFunction::parse(2, f.to_string()).modes() == f.modes());

  CHECK_THROWS(TestFunction::parse(1, "0:1"));
  CHECK_THROWS(TestFunction::parse(1, "1:0.5;-1:0.7"));
  CHECK_NOTHROW(TestFunction::parse(1, "1:0.5;-1:0.5"));
  CHECK_THROWS(TestFunction::parse(2, "1:0.5"));
  CHECK_THROWS(TestFunction::parse(1, "1"));
  CHECK_THROWS(TestFunction::parse(1, "1:a"));
}

TEST_CASE("test function arithmetic") {
  const TestFunction f = TestFunction::parse(1, "1:0.5");
  const TestFunction g = TestFunction::parse(1, "2:0.25");
  const TestFunction h = 2.0 * f + g;
  Eigen::VectorXd x(1);
  x << 0.37;
  CHECK(h(x) == doctest::Approx(2.0 * f(x) + g(x)).epsilon(1e-14));
}

TEST_CASE("cell integrals match numerical quadrature") {
  const TestFunction f1 = TestFunction::parse(1, "1:0.5;3:0.1,0.2");
  const TorusGrid g1(1, 7);
  const RealField h1 = cell_integrals(g1, f1);
  for (Index y = 0; y < g1.size(); ++y) {
    const double c = static_cast<double>(y) / 7;
    const double ref = simpson(c - 0.5 / 7, c + 0.5 / 7, 200, [&](double t) {
      Eigen::VectorXd p(1);
      p << t;
      return f1(p);
    });
    CHECK(h1(y) == doctest::Approx(ref).epsilon(1e-10));
  }

  const TestFunction f2 = TestFunction::parse(2, "1,1:0.5;2,-1:0.2");
  const TorusGrid g2(2, 5);
  const RealField h2 = cell_integrals(g2, f2);
  for (Index y = 0; y < g2.size(); ++y) {
    const Coord c = g2.coords(y);
    const double cx = c(0) / 5.0;
    const double cy = c(1) / 5.0;
    const double ref = simpson(cx - 0.1, cx + 0.1, 40, [&](double s) {
      return simpson(cy - 0.1, cy + 0.1, 40, [&](double t) {
        Eigen::VectorXd p(2);
        p << s, t;
        return f2(p);
      });
    });
    CHECK(h2(y) == doctest::Approx(ref).epsilon(1e-9));
  }
  CHECK(std::abs(h2.sum()) < 1e-14);
}

TEST_CASE("kernel equals the direct Green-function sum") {
  for (auto [d, n] : {std::pair{1, 12}, {2, 6}}) {
    const TorusGrid grid(d, n);
    const TestFunction f = d == 1 ? TestFunction::parse(1, "1:0.5;2:0.1,0.3") : TestFunction::parse(2, "1,0:0.5;1,1:0.2");
    const double alpha = 1.5;
    const ScalingKernel k = kernel_kn(grid, f, alpha);
    const RealField h = cell_integrals(grid, f);
    RealField direct = RealField::Zero(grid.size());
    for (Index w = 0; w < grid.size(); ++w) direct += torus_green_row(grid, w) * h(w);
    direct *= scaling_constant(d, n, alpha) / (2.0 * d);
    CHECK((k.values - direct).abs().maxCoeff() < 1e-12 * (1.0 + direct.abs().maxCoeff()));
    CHECK(k.power_sum == doctest::Approx(direct.abs().pow(alpha).sum()).epsilon(1e-10));
    CHECK(k.zero_mode_residual < 1e-12);
  }
}

TEST_CASE("scaling constant") {
  CHECK(scaling_constant(1, 16, 2.0) == doctest::Approx(4 * kPi * kPi * std::pow(16.0, -1.5)));
  CHECK(scaling_constant(3, 8, 1.5) == doctest::Approx(4 * kPi * kPi * std::pow(8.0, -1.0)));
}

TEST_CASE("kernel pairing reproduces the odometer pairing") {
  const TorusGrid grid(2, 16);
  const TestFunction f = TestFunction::parse(2, "1,0:0.5;1,2:0.3");
  const double alpha = 1.5;
  const MassField s = init_configuration(grid, HeavyTailLaw::stable(alpha), 1.0, true, 21);
  const RealField u = odometer_exact(grid, s.mass).values;
  const ScalingKernel k = kernel_kn(grid, f, alpha);
  const RealField sigma = s.mass - 1.0;
  const double lhs = pair_field(k, sigma);
  const double rhs = pair_odometer(grid, f, alpha, u);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
}

TEST_CASE("single cosine mode has a closed-form limit") {
  for (double alpha : {0.5, 1.0, 1.3, 1.7, 2.0}) {
    for (double c : {1.0, 0.3}) {
      TestFunction f(1);
      Coord z(1);
      z << 1;
      f.set_mode(z, c / 2.0);
      const LimitValue l = limit_functional(f, alpha);
      CHECK(l.value == doctest::Approx(std::pow(c, alpha) * cos_moment(alpha)).epsilon(1e-10));
      CHECK(l.relative_error < 1e-10);
    }
  }
  CHECK(cos_moment(1.0) == doctest::Approx(2.0 / kPi));
}

TEST_CASE("limit functional against brute-force quadrature") {
  {
    const TestFunction f = TestFunction::parse(1, "1:0.5;2:0.15");
    const double alpha = 1.3;
    const double ref = midpoint(1, 2'000'000, [&](double x, double) {
      return std::pow(std::abs(std::cos(2 * kPi * x) + 0.075 * std::cos(4 * kPi * x)), alpha);
    });
    CHECK(limit_functional(f, alpha).value == doctest::Approx(ref).epsilon(1e-9));
  }
  {
    const TestFunction f = TestFunction::parse(2, "1,1:0.5;1,0:0.25");
    const double alpha = 1.6;
    const double ref = midpoint(2, 2000, [&](double x, double y) {
      return std::pow(std::abs(0.5 * std::cos(2 * kPi * (x + y)) + 0.5 * std::cos(2 * kPi * x)), alpha);
    });
    CHECK(limit_functional(f, alpha).value == doctest::Approx(ref).epsilon(1e-6));
  }
}

TEST_CASE("limit functional is homogeneous and satisfies the stability identity") {
  const std::vector<TestFunction> fs{TestFunction::parse(1, "1:0.5;3:0.2,0.1"),
                                     TestFunction::parse(2, "1,0:0.5;0,1:0.5")};
  for (double alpha : {0.7, 1.3, 1.5, 1.8}) {
    for (const auto& f : fs) {
      const double base = limit_functional(f, alpha).value;
      for (double c : {0.5, 2.0, 3.7}) {
        CHECK(limit_functional(c * f, alpha).value == doctest::Approx(std::pow(c, alpha) * base).epsilon(1e-10));
      }
    }
    for (const auto& row : stability_property_check(fs, alpha, 0.8, 1.7)) CHECK(row.pass);
  }
  CHECK_THROWS(stability_property_check(fs, 1.5, 0.0, 1.0));
}

TEST_CASE("Parseval identity at alpha = 2") {
  const TestFunction f = TestFunction::parse(1, "1:0.5");
  CHECK(limit_functional(f, 2.0).value == doctest::Approx(0.5).epsilon(1e-12));
  const TorusGrid grid(1, 64);
  CHECK(kernel_kn(grid, f, 2.0).power_sum == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("kernel power sums converge to the limit") {
  const std::vector<int> ns{8, 16, 32, 64};
  for (int d : {1, 2}) {
    const TestFunction f = d == 1 ? TestFunction::parse(1, "1:0.5") : TestFunction::parse(2, "1,0:0.5;1,1:0.25");
    const Sweep s = convergence_sweep(f, 1.5, ns);
    REQUIRE(s.rows.size() == ns.size());
    for (std::size_t i = 1; i < s.rows.size(); ++i) CHECK(s.rows[i].gap < s.rows[i - 1].gap);
    CHECK(s.rate < 0.0);
    if (d == 1) CHECK(s.rows.back().gap < 0.05);
  }
}

TEST_CASE("normalized kernel sup stays in a band") {
  const std::vector<int> ns{8, 16, 32, 64};
  const TestFunction f = TestFunction::parse(2, "1,0:0.5");
  const auto rows = kn_sup_check(f, 1.5, ns);
  REQUIRE(rows.size() == 4);
  CHECK(band_ratio(rows) < 2.0);
  const std::vector<SupRow> flat{{8, 2.0}, {16, 1.0}};
  CHECK(band_ratio(flat) == 2.0);
  CHECK(band_ratio(std::vector<SupRow>{}) == 1.0);
}

TEST_CASE("discrete Fourier coefficients of a trigonometric polynomial") {
  const TestFunction f = TestFunction::parse(2, "1,0:0.5;1,-1:0.2,0.1");
  const std::vector<int> ns{8, 16};
  for (const auto& row : fourier_discrepancy(f, ns)) {
    CHECK(row.max_discrepancy < 1e-13);
    CHECK(row.normalized == doctest::Approx(row.n * row.max_discrepancy));
  }
  // With n = 3 the window mode 4 picks up f^(1) + f^(-2).
  const TestFunction g = TestFunction::parse(1, "1:0.5;2:0.25");
  const std::vector<int> small{3};
  CHECK(fourier_discrepancy(g, small)[0].max_discrepancy == doctest::Approx(0.75));
}

TEST_CASE("Monte Carlo characteristic function agrees with the exact value") {
  const TorusGrid grid(1, 16);
  const TestFunction f = TestFunction::parse(1, "1:0.5");
  const ScalingKernel k = kernel_kn(grid, f, 1.5);
  const long m = 20000;
  const McCf mc = mc_cf(grid, k, HeavyTailLaw::stable(1.5), m, 5);
  const double exact = exact_cf_finite_n(k, 1.0);
  CHECK(std::abs(mc.value - std::complex<double>(exact, 0.0)) < 4.0 / std::sqrt(static_cast<double>(m)));
  CHECK(mc.stderr_ == doctest::Approx(1.0 / std::sqrt(static_cast<double>(m))));
  CHECK(mc.replicas == m);
  const McCf again = mc_cf(grid, k, HeavyTailLaw::stable(1.5), m, 5);
  CHECK(again.value == mc.value);
  CHECK(exact_cf_finite_n(k, 0.0) == 1.0);
  CHECK_THROWS(exact_cf_finite_n(k, -1.0));
}

TEST_CASE("coupling probe structure") {
  const TestFunction f = TestFunction::parse(1, "1:0.5");
  const std::vector<int> ns{16, 32};
  const std::vector<double> eps{0.05, 0.1, 0.5};
  const HeavyTailLaw pareto = HeavyTailLaw::pareto(1.5);
  const HeavyTailLaw stable = HeavyTailLaw::stable(1.5, attraction_scale(pareto));
  const CouplingProbe p = coupling_probe(1, ns, f, 1.5, pareto, stable, 400, eps, 3);
  REQUIRE(p.rows.size() == 2);
  for (const auto& row : p.rows) {
    REQUIRE(row.exceedance.size() == 3);
    CHECK(row.exceedance[0] >= row.exceedance[1]);
    CHECK(row.exceedance[1] >= row.exceedance[2]);
    CHECK(row.l1_distance > 0.0);
  }
  const CouplingProbe same = coupling_probe(1, ns, f, 1.5, stable, stable, 50, eps, 3);
  for (const auto& row : same.rows) {
    CHECK(row.exceedance[0] == 0.0);
    CHECK(row.l1_distance == 0.0);
  }
  CHECK_THROWS(coupling_probe(2, ns, f, 1.5, pareto, stable, 10, eps, 3));
}
