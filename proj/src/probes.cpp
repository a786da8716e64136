#include "sandpile/probes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "sandpile/green.hpp"
#include "sandpile/parallel.hpp"

namespace sandpile {

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double best = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    best = std::max(best, std::abs(i / na - j / nb));
  }
  return best;
}

namespace {

double empirical_quantile(const std::vector<double>& sorted, double p) {
  const auto k = static_cast<std::size_t>(std::floor(p * static_cast<double>(sorted.size() - 1)));
  return sorted[k];
}

}  // namespace

VeSeriesProbe ve_series_probe(int dim, const HeavyTailLaw& law, std::span<const long> truncations, long reps,
                              std::span<const double> margins, std::uint64_t seed) {
  if (dim < 3) throw std::invalid_argument("ve_series_probe: d < 3 rejected (Green function is infinite)");
  law.validate();
  if (reps < 2) throw std::invalid_argument("ve_series_probe: reps must be at least 2");
  if (truncations.empty()) throw std::invalid_argument("ve_series_probe: empty truncation list");
  long longest = 0;
  for (long n : truncations) {
    if (n < 1) throw std::invalid_argument("ve_series_probe: truncations must be positive");
    longest = std::max(longest, 2 * n);
  }

  const LatticeGreen green(dim);
  const auto sites = shell_enumeration(dim, longest);
  std::vector<double> weight(sites.size());
  for (std::size_t j = 0; j < sites.size(); ++j) weight[j] = green(sites[j]) / (2.0 * dim);

  // values[t][r]: v_{N_t} and v_{2 N_t} of replica r.
  const std::size_t count = truncations.size();
  std::vector<std::vector<double>> at_n(count, std::vector<double>(static_cast<std::size_t>(reps)));
  std::vector<std::vector<double>> at_2n = at_n;
  parallel_for(reps, [&](long r) {
    RandomStream stream(seed, "ve-series", static_cast<std::uint64_t>(r));
    double acc = 0.0;
    for (long j = 0; j < longest; ++j) {
      acc += weight[static_cast<std::size_t>(j)] * sample(law, stream);
      for (std::size_t t = 0; t < count; ++t) {
        if (j + 1 == truncations[t]) at_n[t][static_cast<std::size_t>(r)] = acc;
        if (j + 1 == 2 * truncations[t]) at_2n[t][static_cast<std::size_t>(r)] = acc;
      }
    }
  });

  VeSeriesProbe probe;
  probe.dim = dim;
  probe.probabilities = {0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99};
  probe.margins.assign(margins.begin(), margins.end());
  for (std::size_t t = 0; t < count; ++t) {
    VeSeriesRow row;
    row.truncation = truncations[t];
    row.ks = ks_statistic(at_n[t], at_2n[t]);
    std::vector<double> sorted = at_n[t];
    std::sort(sorted.begin(), sorted.end());
    for (double p : probe.probabilities) row.quantiles.push_back(empirical_quantile(sorted, p));
    for (double m : probe.margins) {
      const auto below = std::lower_bound(sorted.begin(), sorted.end(), -m) - sorted.begin();
      row.left_tail.push_back(static_cast<double>(below) / static_cast<double>(reps));
    }
    probe.rows.push_back(std::move(row));
  }
  return probe;
}

std::vector<double> coefficient_sequence(const std::string& descriptor, long length) {
  if (length < 1) throw std::invalid_argument("coefficient_sequence: length must be positive");
  const auto colon = descriptor.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("coefficient sequence must be 'power:p' or 'green:d'");
  const std::string kind = descriptor.substr(0, colon);
  const std::string arg = descriptor.substr(colon + 1);
  std::vector<double> out(static_cast<std::size_t>(length));
  if (kind == "power") {
    const double p = std::stod(arg);
    for (long j = 1; j <= length; ++j) out[static_cast<std::size_t>(j - 1)] = std::pow(static_cast<double>(j), -p);
    return out;
  }
  if (kind == "green") {
    const int dim = std::stoi(arg);
    const LatticeGreen green(dim);
    const auto sites = shell_enumeration(dim, length);
    for (std::size_t j = 0; j < sites.size(); ++j) out[j] = green(sites[j]);
    return out;
  }
  throw std::invalid_argument("unknown coefficient kind '" + kind + "'");
}

TailBoundReport tail_bound_check(std::span<const double> coefficients, const HeavyTailLaw& law, double delta,
                                 std::span<const double> margins, long reps, std::uint64_t seed) {
  law.validate();
  if (law.kind != LawKind::Pareto || !law.symmetric()) {
    throw std::invalid_argument("tail_bound_check: only the symmetric Pareto law is supported");
  }
  const double alpha = law.alpha;
  if (!(alpha > 1.0 && alpha < 2.0)) throw std::invalid_argument("tail_bound_check: alpha must lie in (1, 2)");
  if (!(delta > 0.0)) throw std::invalid_argument("tail_bound_check: delta must be positive");
  if (delta >= alpha) throw std::invalid_argument("tail_bound_check: delta must be smaller than alpha");
  if (coefficients.empty()) throw std::invalid_argument("tail_bound_check: empty coefficient sequence");
  if (reps < 1) throw std::invalid_argument("tail_bound_check: reps must be positive");

  const double s = law.scale;
  TailBoundReport report;
  report.delta = delta;
  const std::size_t length = coefficients.size();
  std::vector<double> tail_sum(length + 1, 0.0);
  std::vector<double> tail_max(length + 1, 0.0);
  for (std::size_t j = length; j-- > 0;) {
    const double c = std::abs(coefficients[j]);
    tail_sum[j] = tail_sum[j + 1] + std::pow(c, delta);
    tail_max[j] = std::max(tail_max[j + 1], c);
  }
  report.delta_sum = tail_sum[0];

  report.x1 = std::max(s, std::pow(2.0 * std::pow(s, alpha), 1.0 / (alpha - delta)));
  auto truncated_second_moment = [&](double x) {
    if (x < s) return 0.0;
    return alpha * std::pow(s, alpha) * (std::pow(x, 2.0 - alpha) - std::pow(s, 2.0 - alpha)) / (2.0 - alpha);
  };
  auto gap = [&](double x) { return 0.5 * std::pow(x, 2.0 - delta) - truncated_second_moment(x); };
  // Beyond `far` the bound holds because U(x) <= alpha s^alpha x^{2-alpha} / (2 - alpha).
  const double far = std::max(s, std::pow(2.0 * alpha * std::pow(s, alpha) / (2.0 - alpha), 1.0 / (alpha - delta)));
  report.x2 = 0.0;
  for (double x = far; x >= s; x *= 0.999) {
    if (gap(x) < 0.0) {
      double lo = x;
      double hi = x / 0.999;
      for (int iter = 0; iter < 100; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (gap(mid) < 0.0) lo = mid; else hi = mid;
      }
      report.x2 = hi;
      break;
    }
  }
  const double threshold = std::max(report.x1, report.x2);

  for (std::size_t k = 0; k < margins.size(); ++k) {
    const double m = margins[k];
    if (!(m >= 1.0)) throw std::invalid_argument("tail_bound_check: margins must be >= 1");
    const double eps = 1.0 / m;
    TailBoundRow row;
    row.margin = m;
    for (std::size_t j = 0; j < length; ++j) {
      if (tail_sum[j] < std::pow(eps, 2.0 * delta) && tail_max[j] <= std::min(1.0, eps / threshold)) {
        row.n1 = static_cast<long>(j) + 1;
        break;
      }
    }
    if (row.n1 < 0) {
      row.probability = std::numeric_limits<double>::quiet_NaN();
      report.rows.push_back(row);
      continue;
    }
    std::vector<char> exceed(static_cast<std::size_t>(reps), 0);
    const auto first = static_cast<std::size_t>(row.n1 - 1);
    parallel_for(reps, [&](long r) {
      RandomStream stream(seed, "tail-bound-" + std::to_string(k), static_cast<std::uint64_t>(r));
      double acc = 0.0;
      for (std::size_t j = first; j < length; ++j) acc += coefficients[j] * sample(law, stream);
      exceed[static_cast<std::size_t>(r)] = std::abs(acc) > eps;
    });
    long hits = 0;
    for (char e : exceed) hits += e;
    row.probability = static_cast<double>(hits) / static_cast<double>(reps);
    report.rows.push_back(row);
  }

  double a = std::numeric_limits<double>::infinity();
  for (const auto& row : report.rows) {
    if (row.margin > 1.0 && row.probability > 0.0) a = std::min(a, -std::log(row.probability) / std::log(row.margin));
  }
  report.exponent = std::isfinite(a) ? a : std::numeric_limits<double>::quiet_NaN();
  for (auto& row : report.rows) row.bound = std::pow(row.margin, -report.exponent);
  return report;
}

}  // namespace sandpile
