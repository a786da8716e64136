#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "sandpile/sandpile.hpp"

using namespace sandpile;

namespace {

double sup(const RealField& v) { return v.abs().maxCoeff(); }

}  // namespace

TEST_CASE("uniform unit mass is already stable") {
  const TorusGrid grid(2, 6);
  const MassField s = init_configuration(grid, HeavyTailLaw::point(), 1.0, false, 1);
  const ToppleResult r = topple_to_stability(s);
  CHECK(r.stabilized);
  CHECK(r.rounds == 0);
  CHECK(sup(r.odometer.values) == 0.0);
  CHECK(sup(odometer_exact(grid, s.mass).values) == 0.0);
}

TEST_CASE("two-site hand example") {
  const TorusGrid grid(1, 2);
  MassField s{grid, RealField(2), {}};
  s.mass << 2.0, 0.0;
  const ToppleResult r = topple_to_stability(s);
  CHECK(r.rounds == 1);
  CHECK(r.odometer.values(0) == doctest::Approx(0.5));
  CHECK(r.odometer.values(1) == doctest::Approx(0.0));
  CHECK(r.final.mass(0) == doctest::Approx(1.0));
  CHECK(r.final.mass(1) == doctest::Approx(1.0));
  const OdometerField exact = odometer_exact(grid, s.mass);
  CHECK(exact.values(0) == doctest::Approx(0.5));
  CHECK(exact.values(1) == doctest::Approx(0.0));
}

TEST_CASE("unconserved torus input is rejected") {
  const TorusGrid grid(1, 8);
  MassField s{grid, RealField::Constant(8, 1.5), {}};
  CHECK_THROWS_AS(topple_to_stability(s), std::invalid_argument);
  CHECK_THROWS_AS(odometer_exact(grid, s.mass), std::invalid_argument);
  CHECK_THROWS(init_configuration(grid, HeavyTailLaw::gaussian(1.0), 0.5, true, 1));
  CHECK_THROWS(init_configuration(BoxDomain(1, 3), HeavyTailLaw::gaussian(1.0), 1.0, true, 1));
}

TEST_CASE("conserved configurations sum to the volume") {
  const TorusGrid grid(2, 8);
  const MassField s = init_configuration(grid, HeavyTailLaw::stable(1.5), 1.0, true, 4);
  CHECK(s.mass.sum() == doctest::Approx(64.0).epsilon(1e-12));
  const MassField t = init_configuration(grid, HeavyTailLaw::stable(1.5), 1.0, true, 4);
  CHECK(sup(s.mass - t.mass) == 0.0);
  const MassField other = init_configuration(grid, HeavyTailLaw::stable(1.5), 1.0, true, 4, 1);
  CHECK(sup(s.mass - other.mass) > 0.0);
}

TEST_CASE("toppling invariants on random conserved tori") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const TorusGrid grid(2, 8);
    const MassField s = init_configuration(grid, HeavyTailLaw::gaussian(1.0), 1.0, true, seed);
    const ToppleResult r = topple_to_stability(s, 1e-11);
    CHECK(r.stabilized);
    CHECK(r.final.mass.maxCoeff() < 1.0 + 1e-11);
    CHECK(r.final.mass.sum() == doctest::Approx(s.mass.sum()).epsilon(1e-12));
    CHECK(r.odometer.values.minCoeff() >= 0.0);
    CHECK(sup(s.mass + laplacian(grid, r.odometer.values) - r.final.mass) < 1e-9);
    const RealField& u = r.odometer.values;
    CHECK(sup((u - u.minCoeff()) - odometer_exact(grid, s.mass).values) < 1e-6);
  }
}

TEST_CASE("exact odometer solves its defining equations") {
  const TorusGrid grid(2, 32);
  const MassField s = init_configuration(grid, HeavyTailLaw::gaussian(1.0), 1.0, true, 12);
  const RealField u = odometer_exact(grid, s.mass).values;
  CHECK(u.minCoeff() == 0.0);
  CHECK(sup(laplacian(grid, u) - (1.0 - s.mass)) < 1e-9);
}

TEST_CASE("schedules agree sitewise") {
  const TorusGrid grid(2, 8);
  const MassField s = init_configuration(grid, HeavyTailLaw::gaussian(1.0), 1.0, true, 9);
  const ToppleResult a = topple_to_stability(s, 1e-11, 10'000'000, Schedule::Synchronous);
  const ToppleResult b = topple_to_stability(s, 1e-11, 10'000'000, Schedule::Checkerboard);
  CHECK(sup(a.odometer.values - b.odometer.values) < 1e-8);
  CHECK(sup(a.final.mass - b.final.mass) < 1e-8);
  CHECK(parse_schedule(to_string(Schedule::Checkerboard)) == Schedule::Checkerboard);
  CHECK_THROWS(parse_schedule("random"));
}

TEST_CASE("round cap returns a flagged partial state") {
  const TorusGrid grid(1, 16);
  const MassField s = init_configuration(grid, HeavyTailLaw::gaussian(2.0), 1.0, true, 3);
  const ToppleResult r = topple_to_stability(s, 1e-12, 3);
  CHECK_FALSE(r.stabilized);
  CHECK(r.rounds == 3);
  CHECK(r.max_excess > 0.0);
}

TEST_CASE("box toppling conserves mass including the absorbed part") {
  const BoxDomain box(2, 4);
  const MassField s = init_configuration(box, HeavyTailLaw::stable(1.5), 1.2, false, 2);
  const ToppleResult r = topple_to_stability(s, 1e-10);
  CHECK(r.stabilized);
  CHECK(r.final.total() == doctest::Approx(s.total()).epsilon(1e-10));
  CHECK(r.final.absorbed.minCoeff() >= 0.0);
  CHECK(r.final.mass.maxCoeff() < 1.0 + 1e-10);
}

TEST_CASE("obstacle solver agrees with box toppling") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const BoxDomain box(2, 5);
    const MassField s = init_configuration(box, HeavyTailLaw::gaussian(0.7), 1.1, false, seed);
    const ToppleResult topple = topple_to_stability(s, 1e-12);
    const ObstacleResult obstacle = stabilize_obstacle(box, s.mass, RealField::Zero(box.size()), 1e-12);
    CHECK(obstacle.converged);
    CHECK(sup(obstacle.odometer - topple.odometer.values) < 1e-8);
    // Complementarity: u >= 0, final mass <= 1, equality where u > 0.
    const RealField final_mass = s.mass + dirichlet_laplacian(box, obstacle.odometer);
    CHECK(obstacle.odometer.minCoeff() >= 0.0);
    CHECK(final_mass.maxCoeff() < 1.0 + 1e-9);
    for (Index i = 0; i < box.size(); ++i) {
      if (obstacle.odometer(i) > 1e-9) CHECK(final_mass(i) == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("nested traces are nondecreasing and method independent") {
  const std::vector<int> radii{1, 2, 4, 6};
  const NestedTrace a = nested_stabilize(2, HeavyTailLaw::gaussian(0.5), 1.0, radii, 1e-11, 5);
  const NestedTrace b = nested_stabilize(2, HeavyTailLaw::gaussian(0.5), 1.0, radii, 1e-11, 5, 0,
                                         NestedMethod::Toppling);
  CHECK(a.complete);
  CHECK(b.complete);
  CHECK(a.monotone);
  REQUIRE(a.origin_odometer.size() == radii.size());
  for (std::size_t i = 0; i < radii.size(); ++i) {
    CHECK(a.origin_odometer[i] == doctest::Approx(b.origin_odometer[i]).epsilon(1e-7));
    if (i) CHECK(a.origin_odometer[i] >= a.origin_odometer[i - 1] - 1e-12);
  }
  CHECK(parse_nested_method("toppling") == NestedMethod::Toppling);
}

TEST_CASE("growth classification thresholds") {
  double ratio = 0.0;
  CHECK(classify_growth(std::vector<double>{1.0, 2.0, 2.02}, &ratio) == Growth::Plateau);
  CHECK(ratio == doctest::Approx(1.01));
  CHECK(classify_growth(std::vector<double>{1.0, 2.0, 4.0}) == Growth::Growth);
  CHECK(classify_growth(std::vector<double>{1.0, 2.0, 2.4}) == Growth::Inconclusive);
  CHECK(classify_growth(std::vector<double>{0.0, 0.0, 0.0}) == Growth::Plateau);
  CHECK(to_string(Growth::Growth) == "growth");
}

TEST_CASE("dichotomy separates subcritical and supercritical means") {
  const std::vector<int> radii{4, 8, 16};
  const DichotomyReport low = dichotomy_experiment(2, HeavyTailLaw::gaussian(0.5), 0.9, radii, 4, 3);
  const DichotomyReport high = dichotomy_experiment(2, HeavyTailLaw::gaussian(0.5), 1.1, radii, 4, 3);
  CHECK(low.plateau_fraction == doctest::Approx(1.0));
  CHECK(high.growth_fraction == doctest::Approx(1.0));
  CHECK(low.traces.size() == 4);
  CHECK(low.plateau_fraction + low.growth_fraction + low.inconclusive_fraction == doctest::Approx(1.0));
}

TEST_CASE("domain helpers") {
  const Domain torus = TorusGrid(3, 4);
  const Domain box = BoxDomain(2, 3);
  CHECK(domain_size(torus) == 64);
  CHECK(domain_size(box) == 49);
  CHECK(domain_dim(box) == 2);
  CHECK(describe(box).find("box") != std::string::npos);
}
