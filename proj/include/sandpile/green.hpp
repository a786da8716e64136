#ifndef SANDPILE_GREEN_HPP
#define SANDPILE_GREEN_HPP

#include <cstdint>
#include <map>
#include <mutex>
#include <vector>

#include "sandpile/box.hpp"
#include "sandpile/torus.hpp"

namespace sandpile {

/// Torus Green row g(x, .) in the mean-zero gauge: its transform is
/// -2d n^{-d} chi_{-a}(x) / lambda_a for a != 0 and 0 at a = 0.
RealField torus_green_row(const TorusGrid& grid, Index source);

/// Expected visits of simple random walk from `source` before leaving the box.
struct KilledGreen {
  RealField values;
  SolveInfo solve;
};

/// Solves -Delta g = 2d delta_source on the box (g = 0 outside) by CG.
/// Throws std::runtime_error when CG does not reach the tolerance.
KilledGreen killed_green(const BoxDomain& box, Index source, double rel_tol = 1e-10);

/// Killed Green row from the origin, stored on the orthant [0, m]^d only.
///
/// The row is invariant under coordinate reflections, so the solve runs on the
/// (m+1)^d orthant sites. `weights` holds the orbit size 2^{#nonzero coords} of
/// each orthant site, so sums over the full box are sum(weights * f(values)).
struct OrthantGreen {
  int dim = 0;
  int radius = 0;
  RealField values;
  RealField weights;
  SolveInfo solve;

  double at(const Coord& y) const;
  /// Expands to the full box in BoxDomain storage order.
  RealField full() const;
};

OrthantGreen killed_green_origin(int dim, int radius, double rel_tol = 1e-10);

struct MonteCarloGreen {
  RealField mean;
  RealField stderr_;
  long walks = 0;
};

/// Empirical visit counts over `walks` independent walks killed on exit.
MonteCarloGreen killed_green_mc(const BoxDomain& box, Index source, long walks, std::uint64_t seed);

/// (sum_y g_m(o, y)^alpha)^{1/alpha} over the box of radius m.
double nu_alpha(const OrthantGreen& green, double alpha);
double nu_alpha(int dim, int radius, double alpha);

/// Full-space Green function of simple random walk on Z^d, d >= 3:
/// g(y) = int_0^inf prod_j exp(-t/d) I_{|y_j|}(t/d) dt (expected visits).
/// Values are cached by the sorted absolute coordinates.
class LatticeGreen {
 public:
  explicit LatticeGreen(int dim);

  int dim() const { return dim_; }
  double operator()(const Coord& y) const;

 private:
  double evaluate(const std::vector<int>& key) const;

  int dim_;
  mutable std::mutex mutex_;
  mutable std::map<std::vector<int>, double> cache_;
};

/// exp(-x) I_k(x) for k >= 0, x >= 0.
double scaled_bessel_i(int k, double x);

/// Lattice points of Z^d ordered by l-infinity shell, lexicographic within a
/// shell; the origin comes first.
std::vector<Coord> shell_enumeration(int dim, long count);
/// All points of the shell max_j |y_j| = r in lexicographic order.
std::vector<Coord> shell(int dim, int r);

struct GreenSeries {
  int radius = 0;
  double beta = 0.0;
  /// Partial sums S_r = sum_{|y|_inf <= r} g(y)^beta for r = 0..radius.
  std::vector<double> partial_sums;
  double last_shell = 0.0;
  double total = 0.0;
};

/// Shell partial sums of g(0, y)^beta; rejects d < 3.
GreenSeries lattice_green_series(int dim, double beta, int radius);

}  // namespace sandpile

#endif  // SANDPILE_GREEN_HPP
