#ifndef SANDPILE_STABLE_LAWS_HPP
#define SANDPILE_STABLE_LAWS_HPP

#include <complex>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sandpile/rng.hpp"
#include "sandpile/torus.hpp"

namespace sandpile {

enum class LawKind { Point, Gaussian, Stable, Pareto };

std::string to_string(LawKind kind);
LawKind parse_law_kind(std::string_view name);

/// Law of the noise variables sigma(x) or Y(x).
///
/// - Stable: symmetric alpha-stable with characteristic function
///   exp(-(scale |t|)^alpha).
/// - Pareto: symmetric with P(|X| > t) = min(1, (t / scale)^-alpha).
/// - Gaussian: centred normal with standard deviation `scale`.
/// - Point: mass at 0.
/// A nonzero `shift` translates any of these (the shifted(base, mu) kind).
struct HeavyTailLaw {
  LawKind kind = LawKind::Point;
  double alpha = 2.0;
  double scale = 1.0;
  double shift = 0.0;

  static HeavyTailLaw point() { return {LawKind::Point, 2.0, 1.0, 0.0}; }
  static HeavyTailLaw gaussian(double stddev) { return {LawKind::Gaussian, 2.0, stddev, 0.0}; }
  static HeavyTailLaw stable(double alpha, double scale = 1.0) {
    return {LawKind::Stable, alpha, scale, 0.0};
  }
  static HeavyTailLaw pareto(double alpha, double scale = 1.0) {
    return {LawKind::Pareto, alpha, scale, 0.0};
  }
  HeavyTailLaw shifted(double mu) const {
    HeavyTailLaw law = *this;
    law.shift += mu;
    return law;
  }

  bool symmetric() const { return shift == 0.0; }
  /// Throws std::invalid_argument for alpha outside (0, 2] or nonpositive scale.
  void validate() const;
  std::string describe() const;
};

double sample(const HeavyTailLaw& law, RandomStream& stream);
RealField sample_field(const HeavyTailLaw& law, RandomStream& stream, Index count);

double cdf(const HeavyTailLaw& law, double x);

/// Probabilities for which the stable quantile table is used; outside this
/// range the asymptotic tail form takes over.
inline constexpr double kQuantileTableLow = 1e-4;
inline constexpr double kQuantileTableHigh = 1.0 - 1e-4;

/// Left-continuous generalised inverse F^{<-}(p), p in (0, 1).
double quantile(const HeavyTailLaw& law, double p);
/// True when quantile(law, p) falls back to the asymptotic tail form.
bool quantile_clipped(const HeavyTailLaw& law, double p);

/// Closed-form characteristic function (Point, Gaussian, Stable only).
std::complex<double> characteristic_function(const HeavyTailLaw& law, double theta);

/// Scale c such that k^{-1/alpha} (X_1 + ... + X_k) -> SaS(c) for a symmetric law.
/// For Pareto this is scale * (Gamma(1 - alpha) cos(pi alpha / 2))^{1/alpha}
/// (scale * pi / 2 at alpha = 1); alpha = 2 Pareto has no normal attraction.
double attraction_scale(const HeavyTailLaw& law);

/// Standard symmetric alpha-stable law SaS(1).
///
/// The distribution function comes from the one-dimensional integral
/// representation over (0, pi/2), whose integrand is positive and bounded, so
/// tail probabilities are computed without cancellation. Quantiles use a
/// monotone cubic table (8192 knots in log-space) on p in [1e-4, 1 - 1e-4].
class StableDistribution {
 public:
  explicit StableDistribution(double alpha);

  double alpha() const { return alpha_; }
  double cdf(double x) const;
  /// P(X > x) for x >= 0.
  double upper_tail(double x) const;
  double quantile(double p) const;
  double density_at_zero() const;
  /// C in P(X > x) ~ C x^{-alpha}.
  double tail_constant() const;
  /// Knots of the quantile table; builds it on first use.
  std::size_t knot_count() const;

 private:
  double upper_tail_integral(double x) const;
  double table_quantile_upper(double tail) const;
  void build_table() const;

  double alpha_;
  mutable std::once_flag table_once_;
  mutable std::vector<double> log_tail_;  // -log P(X > x_k), increasing
  mutable std::vector<double> log_x_;     // log x_k
  mutable std::vector<double> slope_;     // d log_x / d log_tail at knots
};

/// Shared immutable SaS(1) distribution for `alpha` (built on first use).
std::shared_ptr<const StableDistribution> stable_distribution(double alpha);

/// Standard normal quantile.
double normal_quantile(double p);

struct CfEstimate {
  double theta = 0.0;
  std::complex<double> value;
  double stderr_ = 0.0;
};

/// (1/M) sum_j exp(i theta X_j) at every theta, with standard error 1/sqrt(M).
std::vector<CfEstimate> empirical_cf(std::span<const double> samples, std::span<const double> thetas);

struct NormalizedSumRow {
  long k = 0;
  std::vector<CfEstimate> cf;
  /// Least-squares fit of -log Re CF = c^alpha |theta|^alpha.
  double fitted_scale = 0.0;
};

struct NormalizedSumProbe {
  std::vector<NormalizedSumRow> rows;
  std::vector<std::string> warnings;
};

/// Empirical CF of k^{-1/alpha} sum_{j<=k} X_j over `reps` replicas per k.
NormalizedSumProbe normalized_sum_probe(const HeavyTailLaw& law, std::span<const long> ks, long reps,
                                        std::span<const double> thetas, std::uint64_t seed);

/// Fitted c from CF estimates (only points with Re CF in (0.02, 0.98) are used).
double fit_stable_scale(std::span<const CfEstimate> cf, double alpha);

}  // namespace sandpile

#endif  // SANDPILE_STABLE_LAWS_HPP
