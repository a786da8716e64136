#include "sandpile/stable_laws.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "sandpile/quadrature.hpp"

namespace sandpile {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_one(double alpha) { return alpha == 1.0; }
bool is_two(double alpha) { return alpha == 2.0; }

template <typename F>
double adaptive_gauss(F&& f, double a, double b, double whole, double tol, int depth) {
  const double mid = 0.5 * (a + b);
  const double left = integrate(f, a, mid, 10);
  const double right = integrate(f, mid, b, 10);
  const double sum = left + right;
  if (depth <= 0 || std::abs(sum - whole) <= std::max(tol, 1e-13 * std::abs(sum))) return sum;
  return adaptive_gauss(f, a, mid, left, 0.5 * tol, depth - 1) +
         adaptive_gauss(f, mid, b, right, 0.5 * tol, depth - 1);
}

}  // namespace

std::string to_string(LawKind kind) {
  switch (kind) {
    case LawKind::Point: return "point";
    case LawKind::Gaussian: return "gaussian";
    case LawKind::Stable: return "sas";
    case LawKind::Pareto: return "pareto";
  }
  return "unknown";
}

LawKind parse_law_kind(std::string_view name) {
  if (name == "point") return LawKind::Point;
  if (name == "gaussian" || name == "normal") return LawKind::Gaussian;
  if (name == "sas" || name == "stable") return LawKind::Stable;
  if (name == "pareto") return LawKind::Pareto;
  throw std::invalid_argument("unknown law kind '" + std::string(name) + "'");
}

void HeavyTailLaw::validate() const {
  if (!(alpha > 0.0 && alpha <= 2.0)) throw std::invalid_argument("law alpha must lie in (0, 2]");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw std::invalid_argument("law scale must be positive");
  if (!std::isfinite(shift)) throw std::invalid_argument("law shift must be finite");
}

std::string HeavyTailLaw::describe() const {
  std::ostringstream out;
  out << to_string(kind) << "(alpha=" << alpha << ", scale=" << scale;
  if (shift != 0.0) out << ", shift=" << shift;
  out << ')';
  return out.str();
}

double sample(const HeavyTailLaw& law, RandomStream& stream) {
  switch (law.kind) {
    case LawKind::Point:
      return law.shift;
    case LawKind::Gaussian:
      return law.scale * stream.normal() + law.shift;
    case LawKind::Stable: {
      // Chambers-Mallows-Stuck, symmetric case; CF exp(-|t|^alpha) before scaling.
      const double v = kPi * (stream.uniform() - 0.5);
      double x;
      if (is_one(law.alpha)) {
        x = std::tan(v);
      } else {
        const double w = stream.exponential();
        const double a = law.alpha;
        x = std::sin(a * v) / std::pow(std::cos(v), 1.0 / a) *
            std::pow(std::cos((1.0 - a) * v) / w, (1.0 - a) / a);
      }
      return law.scale * x + law.shift;
    }
    case LawKind::Pareto: {
      const double magnitude = law.scale * std::pow(stream.uniform(), -1.0 / law.alpha);
      const bool negative = (stream.bits() >> 63) != 0;
      return (negative ? -magnitude : magnitude) + law.shift;
    }
  }
  throw std::logic_error("unreachable law kind");
}

RealField sample_field(const HeavyTailLaw& law, RandomStream& stream, Index count) {
  law.validate();
  RealField out(count);
  for (Index i = 0; i < count; ++i) out(i) = sample(law, stream);
  return out;
}

// --- standard symmetric stable -------------------------------------------------

StableDistribution::StableDistribution(double alpha) : alpha_(alpha) {
  if (!(alpha > 0.0 && alpha <= 2.0)) throw std::invalid_argument("stable alpha must lie in (0, 2]");
  if (is_one(alpha) || is_two(alpha)) return;  // closed forms
  if (std::abs(alpha - 1.0) < 0.01) {
    throw std::invalid_argument("stable alpha within 0.01 of 1 (other than 1) is not supported");
  }
}

void StableDistribution::build_table() const {
  const double x_lo = 1e-4;
  double x_hi = 1.0;
  while (upper_tail_integral(x_hi) > 0.25 * kQuantileTableLow) x_hi *= 2.0;

  constexpr int knots = 8192;
  log_tail_.resize(knots);
  log_x_.resize(knots);
  const double a = std::log(x_lo);
  const double b = std::log(x_hi);
  for (int k = 0; k < knots; ++k) {
    const double lx = a + (b - a) * k / (knots - 1);
    log_x_[static_cast<std::size_t>(k)] = lx;
    log_tail_[static_cast<std::size_t>(k)] = -std::log(upper_tail_integral(std::exp(lx)));
  }
  for (std::size_t k = 1; k < log_tail_.size(); ++k) {
    if (!(log_tail_[k] > log_tail_[k - 1])) {
      throw std::runtime_error("stable quantile table is not strictly monotone");
    }
  }

  // Fritsch-Butland monotone slopes of log x as a function of -log tail.
  const std::size_t m = log_tail_.size();
  std::vector<double> h(m - 1);
  std::vector<double> delta(m - 1);
  for (std::size_t k = 0; k + 1 < m; ++k) {
    h[k] = log_tail_[k + 1] - log_tail_[k];
    delta[k] = (log_x_[k + 1] - log_x_[k]) / h[k];
  }
  slope_.assign(m, 0.0);
  slope_[0] = delta[0];
  slope_[m - 1] = delta[m - 2];
  for (std::size_t k = 1; k + 1 < m; ++k) {
    if (delta[k - 1] * delta[k] <= 0.0) continue;
    const double w1 = 2.0 * h[k] + h[k - 1];
    const double w2 = h[k] + 2.0 * h[k - 1];
    slope_[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
  }
}

double StableDistribution::upper_tail_integral(double x) const {
  if (x <= 0.0) return 0.5;
  const double a = alpha_;
  const double power = a / (a - 1.0);
  const double log_c = power * std::log(x);
  auto log_scaled_v = [&](double theta) {
    const double cos_t = std::cos(theta);
    return log_c + power * (std::log(cos_t) - std::log(std::sin(a * theta))) +
           std::log(std::cos((a - 1.0) * theta)) - std::log(cos_t);
  };
  // The integrand switches between 0 and 1 where c V(theta) = 1; V is monotone,
  // so bisect for that point and split there.
  const double end = 0.5 * kPi;
  double lo = 1e-12;
  double hi = end - 1e-12;
  double split = -1.0;
  const double h_lo = log_scaled_v(lo);
  const double h_hi = log_scaled_v(hi);
  if (std::isfinite(h_lo) && std::isfinite(h_hi) && (h_lo > 0.0) != (h_hi > 0.0)) {
    for (int iter = 0; iter < 200 && hi - lo > 1e-15; ++iter) {
      const double mid = 0.5 * (lo + hi);
      if ((log_scaled_v(mid) > 0.0) == (h_lo > 0.0)) lo = mid; else hi = mid;
    }
    split = 0.5 * (lo + hi);
  }
  auto piecewise = [&](auto&& f) {
    std::vector<double> cuts{0.0};
    if (split > 0.0) {
      for (double w : {1e-2, 1e-4, 1e-6}) {
        if (split - w > 0.0) cuts.push_back(split - w);
      }
      cuts.push_back(split);
      for (double w : {1e-6, 1e-4, 1e-2}) {
        if (split + w < end) cuts.push_back(split + w);
      }
    }
    cuts.push_back(end);
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      const double whole = integrate(f, cuts[k], cuts[k + 1], 10);
      acc += adaptive_gauss(f, cuts[k], cuts[k + 1], whole, 1e-20, 24);
    }
    return acc / kPi;
  };
  if (a > 1.0) return piecewise([&](double theta) { return std::exp(-std::exp(log_scaled_v(theta))); });
  return piecewise([&](double theta) { return -std::expm1(-std::exp(log_scaled_v(theta))); });
}

double StableDistribution::upper_tail(double x) const {
  if (x < 0.0) throw std::invalid_argument("upper_tail expects x >= 0");
  if (is_one(alpha_)) return 0.5 - std::atan(x) / kPi;
  if (is_two(alpha_)) return 0.5 * std::erfc(x / 2.0);
  return upper_tail_integral(x);
}

double StableDistribution::cdf(double x) const {
  return x >= 0.0 ? 1.0 - upper_tail(x) : upper_tail(-x);
}

double StableDistribution::density_at_zero() const {
  return std::tgamma(1.0 + 1.0 / alpha_) / kPi;
}

double StableDistribution::tail_constant() const {
  if (is_two(alpha_)) return 0.0;
  return std::tgamma(alpha_) * std::sin(kPi * alpha_ / 2.0) / kPi;
}

std::size_t StableDistribution::knot_count() const {
  if (is_one(alpha_) || is_two(alpha_)) return 0;
  std::call_once(table_once_, [this] { build_table(); });
  return log_tail_.size();
}

double StableDistribution::table_quantile_upper(double tail) const {
  std::call_once(table_once_, [this] { build_table(); });
  const double q = -std::log(tail);
  if (q <= log_tail_.front()) return (0.5 - tail) / density_at_zero();
  if (q >= log_tail_.back()) return std::pow(tail_constant() / tail, 1.0 / alpha_);
  const auto it = std::upper_bound(log_tail_.begin(), log_tail_.end(), q);
  const auto k = static_cast<std::size_t>(it - log_tail_.begin()) - 1;
  const double h = log_tail_[k + 1] - log_tail_[k];
  const double t = (q - log_tail_[k]) / h;
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double y = (2 * t3 - 3 * t2 + 1) * log_x_[k] + (t3 - 2 * t2 + t) * h * slope_[k] +
                   (-2 * t3 + 3 * t2) * log_x_[k + 1] + (t3 - t2) * h * slope_[k + 1];
  return std::exp(y);
}

double StableDistribution::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("quantile expects p in (0, 1)");
  if (is_one(alpha_)) return std::tan(kPi * (p - 0.5));
  if (is_two(alpha_)) return std::numbers::sqrt2 * normal_quantile(p);
  if (p == 0.5) return 0.0;
  const double tail = p < 0.5 ? p : 1.0 - p;
  double x;
  if (p < kQuantileTableLow || p > kQuantileTableHigh) {
    x = std::pow(tail_constant() / tail, 1.0 / alpha_);
  } else {
    x = table_quantile_upper(tail);
  }
  return p < 0.5 ? -x : x;
}

std::shared_ptr<const StableDistribution> stable_distribution(double alpha) {
  static std::mutex mutex;
  static std::map<double, std::shared_ptr<const StableDistribution>> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(alpha);
  if (it == cache.end()) {
    it = cache.emplace(alpha, std::make_shared<const StableDistribution>(alpha)).first;
  }
  return it->second;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile expects p in (0, 1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01, -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement against erfc.
  for (int iter = 0; iter < 2; ++iter) {
    const double e = p < 0.5 ? 0.5 * std::erfc(-x / std::numbers::sqrt2) - p
                             : (1.0 - p) - 0.5 * std::erfc(x / std::numbers::sqrt2);
    const double u = e * std::sqrt(2.0 * kPi) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

// --- law-level dispatch -------------------------------------------------------

double cdf(const HeavyTailLaw& law, double x) {
  law.validate();
  const double y = x - law.shift;
  switch (law.kind) {
    case LawKind::Point:
      return y >= 0.0 ? 1.0 : 0.0;
    case LawKind::Gaussian:
      return 0.5 * std::erfc(-y / (law.scale * std::numbers::sqrt2));
    case LawKind::Stable:
      return stable_distribution(law.alpha)->cdf(y / law.scale);
    case LawKind::Pareto: {
      const double t = y / law.scale;
      if (t >= 1.0) return 1.0 - 0.5 * std::pow(t, -law.alpha);
      if (t <= -1.0) return 0.5 * std::pow(-t, -law.alpha);
      return 0.5;
    }
  }
  throw std::logic_error("unreachable law kind");
}

double quantile(const HeavyTailLaw& law, double p) {
  law.validate();
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("quantile expects p in (0, 1)");
  switch (law.kind) {
    case LawKind::Point:
      return law.shift;
    case LawKind::Gaussian:
      return law.scale * normal_quantile(p) + law.shift;
    case LawKind::Stable:
      return law.scale * stable_distribution(law.alpha)->quantile(p) + law.shift;
    case LawKind::Pareto: {
      if (p <= 0.5) return -law.scale * std::pow(2.0 * p, -1.0 / law.alpha) + law.shift;
      return law.scale * std::pow(2.0 * (1.0 - p), -1.0 / law.alpha) + law.shift;
    }
  }
  throw std::logic_error("unreachable law kind");
}

bool quantile_clipped(const HeavyTailLaw& law, double p) {
  if (law.kind != LawKind::Stable || is_one(law.alpha) || is_two(law.alpha)) return false;
  return p < kQuantileTableLow || p > kQuantileTableHigh;
}

std::complex<double> characteristic_function(const HeavyTailLaw& law, double theta) {
  law.validate();
  const std::complex<double> phase = std::polar(1.0, theta * law.shift);
  switch (law.kind) {
    case LawKind::Point:
      return phase;
    case LawKind::Gaussian:
      return phase * std::exp(-0.5 * law.scale * law.scale * theta * theta);
    case LawKind::Stable:
      return phase * std::exp(-std::pow(law.scale * std::abs(theta), law.alpha));
    case LawKind::Pareto:
      break;
  }
  throw std::invalid_argument("no closed-form characteristic function for " + law.describe());
}

double attraction_scale(const HeavyTailLaw& law) {
  law.validate();
  switch (law.kind) {
    case LawKind::Point:
      return 0.0;
    case LawKind::Gaussian:
      return law.scale / std::numbers::sqrt2;
    case LawKind::Stable:
      return law.scale;
    case LawKind::Pareto: {
      const double a = law.alpha;
      if (is_two(a)) throw std::invalid_argument("alpha = 2 Pareto is not in a domain of normal attraction");
      if (is_one(a)) return law.scale * kPi / 2.0;
      return law.scale * std::pow(std::tgamma(1.0 - a) * std::cos(kPi * a / 2.0), 1.0 / a);
    }
  }
  throw std::logic_error("unreachable law kind");
}

// --- diagnostics ----------------------------------------------------------------

std::vector<CfEstimate> empirical_cf(std::span<const double> samples, std::span<const double> thetas) {
  if (samples.empty()) throw std::invalid_argument("empirical_cf needs at least one sample");
  std::vector<CfEstimate> out;
  out.reserve(thetas.size());
  const double m = static_cast<double>(samples.size());
  for (double theta : thetas) {
    double re = 0.0;
    double im = 0.0;
    for (double x : samples) {
      re += std::cos(theta * x);
      im += std::sin(theta * x);
    }
    out.push_back({theta, {re / m, im / m}, 1.0 / std::sqrt(m)});
  }
  return out;
}

double fit_stable_scale(std::span<const CfEstimate> cf, double alpha) {
  double num = 0.0;
  double den = 0.0;
  for (const auto& e : cf) {
    const double re = e.value.real();
    if (!(re > 0.02 && re < 0.98)) continue;
    const double t = std::pow(std::abs(e.theta), alpha);
    num += t * -std::log(re);
    den += t * t;
  }
  if (den == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return std::pow(num / den, 1.0 / alpha);
}

NormalizedSumProbe normalized_sum_probe(const HeavyTailLaw& law, std::span<const long> ks, long reps,
                                        std::span<const double> thetas, std::uint64_t seed) {
  law.validate();
  if (!law.symmetric()) throw std::invalid_argument("normalized_sum_probe needs a symmetric law");
  if (reps < 1) throw std::invalid_argument("normalized_sum_probe needs reps >= 1");
  NormalizedSumProbe probe;
  if (law.kind == LawKind::Pareto && is_two(law.alpha)) {
    probe.warnings.emplace_back(
        "alpha = 2 Pareto: slowly varying corrections break normal attraction under k^{-1/2} scaling");
  }
  const double alpha = law.alpha;
  for (long k : ks) {
    if (k < 1) throw std::invalid_argument("normalized_sum_probe: k must be positive");
    std::vector<double> sums(static_cast<std::size_t>(reps));
    const double norm = std::pow(static_cast<double>(k), -1.0 / alpha);
    for (long r = 0; r < reps; ++r) {
      RandomStream stream(seed, "normalized-sum-" + std::to_string(k), static_cast<std::uint64_t>(r));
      double acc = 0.0;
      for (long j = 0; j < k; ++j) acc += sample(law, stream);
      sums[static_cast<std::size_t>(r)] = norm * acc;
    }
    NormalizedSumRow row;
    row.k = k;
    row.cf = empirical_cf(sums, thetas);
    row.fitted_scale = fit_stable_scale(row.cf, alpha);
    probe.rows.push_back(std::move(row));
  }
  return probe;
}

}  // namespace sandpile
