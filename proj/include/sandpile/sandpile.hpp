#ifndef SANDPILE_SANDPILE_HPP
#define SANDPILE_SANDPILE_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sandpile/box.hpp"
#include "sandpile/stable_laws.hpp"
#include "sandpile/torus.hpp"

namespace sandpile {

/// Periodic torus or box with absorbing exterior.
using Domain = std::variant<TorusGrid, BoxDomain>;

Index domain_size(const Domain& domain);
int domain_dim(const Domain& domain);
std::string describe(const Domain& domain);

/// Mass configuration s. On boxes `absorbed` holds the mass parked at each
/// exterior site, indexed like the box of radius m + 1 (only sites adjacent
/// to V_m are ever nonzero); on the torus it is empty.
struct MassField {
  Domain domain;
  RealField mass;
  RealField absorbed;

  double total() const { return mass.sum() + absorbed.sum(); }
};

/// Odometer u: mass emitted to EACH neighbour, so a site emits 2d u in total.
struct OdometerField {
  Domain domain;
  RealField values;
};

/// s(x) = mean + sigma(x) with sigma i.i.d. from `law`. With `conserve`, the
/// noise is recentred instead: s = 1 + sigma - mean(sigma), so sum s = |V|.
/// Conservation is only meaningful on the torus and requires mean = 1.
MassField init_configuration(const Domain& domain, const HeavyTailLaw& law, double mean, bool conserve,
                             std::uint64_t seed, std::uint64_t replica = 0);

enum class Schedule { Synchronous, Checkerboard };
std::string to_string(Schedule schedule);
Schedule parse_schedule(std::string_view name);

struct ToppleResult {
  MassField final;
  OdometerField odometer;
  long rounds = 0;
  bool stabilized = false;
  double max_excess = 0.0;
  /// max |s0 + Delta u - s| at the last check.
  double identity_residual = 0.0;
};

/// Topples every site with mass above 1 until the largest excess is below
/// `tol` or `max_rounds` is reached. Synchronous rounds topple all unstable
/// sites at once; a checkerboard round topples the two parity classes in
/// turn. The identity s0 + Delta u = s is checked every 100 rounds and at the
/// end; a violation throws std::logic_error.
ToppleResult topple_to_stability(const MassField& config, double tol = 1e-10, long max_rounds = 10'000'000,
                                 Schedule schedule = Schedule::Synchronous);

/// Spectral odometer of a conserved torus configuration:
/// u = v - min v with v = poisson_solve(1 - s).
OdometerField odometer_exact(const TorusGrid& grid, const RealField& mass);

enum class NestedMethod { Obstacle, Toppling };
std::string to_string(NestedMethod method);
NestedMethod parse_nested_method(std::string_view name);

struct NestedTrace {
  std::vector<int> radii;
  std::vector<double> origin_odometer;
  std::vector<long> work;  // policy + CG iterations, or toppling rounds
  std::vector<double> residuals;
  bool complete = true;
  bool monotone = true;
  std::string flag;
};

/// Samples one field on the largest box and stabilises its restriction to
/// every V_m, reporting u_m(o).
NestedTrace nested_stabilize(int dim, const HeavyTailLaw& law, double mean, std::span<const int> radii,
                             double tol, std::uint64_t seed, std::uint64_t replica = 0,
                             NestedMethod method = NestedMethod::Obstacle);

enum class Growth { Plateau, Growth, Inconclusive };
std::string to_string(Growth growth);

/// Ratio of the last two entries: below 1.05 plateau, above 1.5 growth.
/// 0/0 counts as plateau.
Growth classify_growth(std::span<const double> trace, double* ratio = nullptr);

struct DichotomyReport {
  std::vector<NestedTrace> traces;
  std::vector<Growth> classes;
  std::vector<double> ratios;
  double plateau_fraction = 0.0;
  double growth_fraction = 0.0;
  double inconclusive_fraction = 0.0;
};

DichotomyReport dichotomy_experiment(int dim, const HeavyTailLaw& law, double mean, std::span<const int> radii,
                                     long reps, std::uint64_t seed, double tol = 1e-10);

}  // namespace sandpile

#endif  // SANDPILE_SANDPILE_HPP
