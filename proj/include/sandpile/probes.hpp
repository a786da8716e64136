#ifndef SANDPILE_PROBES_HPP
#define SANDPILE_PROBES_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sandpile/stable_laws.hpp"

namespace sandpile {

/// Two-sample Kolmogorov-Smirnov statistic sup_x |F_a(x) - F_b(x)|.
double ks_statistic(std::vector<double> a, std::vector<double> b);

struct VeSeriesRow {
  long truncation = 0;
  /// KS distance between the laws of v_N and v_{2N}.
  double ks = 0.0;
  std::vector<double> quantiles;       // of v_N at VeSeriesProbe::probabilities
  std::vector<double> left_tail;       // P(v_N < -M) at VeSeriesProbe::margins
};

struct VeSeriesProbe {
  int dim = 0;
  std::vector<double> probabilities;
  std::vector<double> margins;
  std::vector<VeSeriesRow> rows;
};

/// Empirical law of v_N = (2d)^{-1} sum_{j <= N} g(o, y_j) Y_j, with y_j the
/// shell enumeration of Z^d and g the full-space Green function (d >= 3).
VeSeriesProbe ve_series_probe(int dim, const HeavyTailLaw& law, std::span<const long> truncations, long reps,
                              std::span<const double> margins, std::uint64_t seed);

/// Coefficients c_j for the tail-bound probe: "power:p" gives j^{-p} (j >= 1)
/// and "green:d" gives g(o, y_j) over the shell enumeration.
std::vector<double> coefficient_sequence(const std::string& descriptor, long length);

struct TailBoundRow {
  double margin = 0.0;   // M
  long n1 = -1;          // -1 when no index of the sequence satisfies the conditions
  double probability = 0.0;
  double bound = 0.0;    // M^{-a} with the fitted a
};

struct TailBoundReport {
  double delta = 0.0;
  double delta_sum = 0.0;  // sum_j |c_j|^delta over the supplied sequence
  double x1 = 0.0;
  double x2 = 0.0;
  double exponent = 0.0;   // fitted a
  std::vector<TailBoundRow> rows;
};

/// For each M picks the smallest n1 with sum_{j >= n1} |c_j|^delta < M^{-2 delta}
/// and |c_j| <= min(1, 1 / (M max(x1, x2))) for j >= n1, then estimates
/// P(|sum_{j >= n1} c_j Z_j| > 1/M) by Monte Carlo. Here x1 and x2 are the
/// thresholds with P(|Z| > x) <= x^{-delta} / 2 and E[Z^2; |Z| <= x] <= x^{2 - delta} / 2
/// for all larger x. Only the symmetric Pareto law with alpha in (1, 2) is accepted.
TailBoundReport tail_bound_check(std::span<const double> coefficients, const HeavyTailLaw& law, double delta,
                                 std::span<const double> margins, long reps, std::uint64_t seed);

}  // namespace sandpile

#endif  // SANDPILE_PROBES_HPP
