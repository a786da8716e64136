#include "sandpile/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "sandpile/parallel.hpp"
#include "sandpile/quadrature.hpp"

namespace sandpile {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<int> key_of(const Coord& z) { return {z.data(), z.data() + z.size()}; }

std::vector<int> negated(const std::vector<int>& z) {
  std::vector<int> out(z.size());
  std::transform(z.begin(), z.end(), out.begin(), [](int v) { return -v; });
  return out;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n()");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n()");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(const std::string& text) {
  std::size_t used = 0;
  const double v = std::stod(text, &used);
  if (used != text.size()) throw std::invalid_argument("bad number '" + text + "'");
  return v;
}

int parse_int(const std::string& text) {
  std::size_t used = 0;
  const int v = std::stoi(text, &used);
  if (used != text.size()) throw std::invalid_argument("bad integer '" + text + "'");
  return v;
}

}  // namespace

TestFunction::TestFunction(int dim) : dim_(dim) {
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("test function dimension must lie in 1..8");
}

void TestFunction::set_mode(const Coord& z, std::complex<double> c) {
  if (z.size() != dim_) throw std::invalid_argument("test function mode has the wrong dimension");
  if ((z.array() == 0).all()) throw std::invalid_argument("test functions have no zero mode (mean zero)");
  if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) {
    throw std::invalid_argument("test function coefficient must be finite");
  }
  const auto key = key_of(z);
  const auto mirror = negated(key);
  if (auto it = modes_.find(key); it != modes_.end() && std::abs(it->second - c) > 1e-15 * (1.0 + std::abs(c))) {
    throw std::invalid_argument("inconsistent coefficients for a mode and its conjugate");
  }
  if (c == std::complex<double>(0.0)) {
    modes_.erase(key);
    modes_.erase(mirror);
    return;
  }
  modes_[key] = c;
  modes_[mirror] = std::conj(c);
}

TestFunction TestFunction::parse(int dim, std::string_view literal) {
  TestFunction f(dim);
  for (const auto& entry : split(literal, ';')) {
    if (entry.empty()) continue;
    const auto colon = entry.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("mode entry '" + entry + "' lacks ':'");
    const auto zs = split(std::string_view(entry).substr(0, colon), ',');
    if (static_cast<int>(zs.size()) != dim) {
      throw std::invalid_argument("mode '" + entry + "' does not have " + std::to_string(dim) + " components");
    }
    Coord z(dim);
    for (int j = 0; j < dim; ++j) z(j) = parse_int(zs[static_cast<std::size_t>(j)]);
    const auto cs = split(std::string_view(entry).substr(colon + 1), ',');
    if (cs.empty() || cs.size() > 2) throw std::invalid_argument("coefficient of '" + entry + "' must be re[,im]");
    const std::complex<double> c(parse_double(cs[0]), cs.size() == 2 ? parse_double(cs[1]) : 0.0);
    f.set_mode(z, c);
  }
  return f;
}

std::complex<double> TestFunction::coefficient(const Coord& z) const {
  const auto it = modes_.find(key_of(z));
  return it == modes_.end() ? std::complex<double>(0.0) : it->second;
}

int TestFunction::support_radius() const {
  int r = 0;
  for (const auto& [z, c] : modes_) {
    for (int v : z) r = std::max(r, std::abs(v));
  }
  return r;
}

double TestFunction::operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != dim_) throw std::invalid_argument("test function evaluated at a point of wrong dimension");
  std::complex<double> acc = 0.0;
  double magnitude = 0.0;
  for (const auto& [z, c] : modes_) {
    double phase = 0.0;
    for (int j = 0; j < dim_; ++j) phase += z[static_cast<std::size_t>(j)] * x(j);
    acc += c * std::polar(1.0, kTwoPi * phase);
    magnitude += std::abs(c);
  }
  if (std::abs(acc.imag()) > 1e-12 * std::max(1.0, magnitude)) {
    throw std::logic_error("test function evaluation is not real");
  }
  return acc.real();
}

TestFunction TestFunction::operator+(const TestFunction& other) const {
  if (other.dim_ != dim_) throw std::invalid_argument("adding test functions of different dimension");
  TestFunction out = *this;
  for (const auto& [z, c] : other.modes_) {
    const auto sum = out.modes_[z] + c;
    if (sum == std::complex<double>(0.0)) out.modes_.erase(z); else out.modes_[z] = sum;
  }
  return out;
}

TestFunction TestFunction::operator*(double c) const {
  TestFunction out(dim_);
  if (c == 0.0) return out;
  for (const auto& [z, v] : modes_) out.modes_[z] = c * v;
  return out;
}

std::string TestFunction::to_string() const {
  std::string out;
  char buffer[96];
  for (const auto& [z, c] : modes_) {
    const auto lead = std::find_if(z.begin(), z.end(), [](int v) { return v != 0; });
    if (*lead < 0) continue;  // emit one representative per conjugate pair
    if (!out.empty()) out += ';';
    for (std::size_t j = 0; j < z.size(); ++j) {
      if (j) out += ',';
      out += std::to_string(z[j]);
    }
    std::snprintf(buffer, sizeof buffer, ":%.17g", c.real());
    out += buffer;
    if (c.imag() != 0.0) {
      std::snprintf(buffer, sizeof buffer, ",%.17g", c.imag());
      out += buffer;
    }
  }
  return out;
}

RealField cell_integrals(const TorusGrid& grid, const TestFunction& f) {
  if (f.dim() != grid.dim()) throw std::invalid_argument("cell_integrals: dimension mismatch");
  const int n = grid.side();
  const int d = grid.dim();
  std::vector<std::complex<double>> roots(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) roots[static_cast<std::size_t>(k)] = std::polar(1.0, kTwoPi * k / n);
  auto side_integral = [n](int k) {
    if (k == 0) return 1.0 / n;
    return std::sin(std::numbers::pi * k / n) / (std::numbers::pi * k);
  };

  ComplexField acc = ComplexField::Zero(grid.size());
  for (const auto& [z, c] : f.modes()) {
    double weight = 1.0;
    for (int k : z) weight *= side_integral(k);
    if (weight == 0.0) continue;
    const std::complex<double> scaled = c * weight;
    for (Index y = 0; y < grid.size(); ++y) {
      const Coord x = grid.coords(y);
      long phase = 0;
      for (int j = 0; j < d; ++j) phase += static_cast<long>(z[static_cast<std::size_t>(j)]) * x(j);
      phase %= n;
      if (phase < 0) phase += n;
      acc(y) += scaled * roots[static_cast<std::size_t>(phase)];
    }
  }
  return acc.real();
}

double scaling_constant(int dim, int side, double alpha) {
  return 4.0 * std::numbers::pi * std::numbers::pi * std::pow(static_cast<double>(side), dim - dim / alpha - 2.0);
}

ScalingKernel kernel_kn(const TorusGrid& grid, const TestFunction& f, double alpha) {
  if (!(alpha > 0.0 && alpha <= 2.0)) throw std::invalid_argument("kernel_kn: alpha must lie in (0, 2]");
  const RealField h = cell_integrals(grid, f);
  const double h_mass = h.abs().sum();
  if (std::abs(h.sum()) > 1e-9 * h_mass + 1e-300) {
    throw std::logic_error("kernel_kn: cell integrals do not sum to zero");
  }
  // Transform of g(0, .) is -2d / (n^d lambda_a); the convolution theorem
  // with this normalisation contributes a factor n^d.
  const double cn = scaling_constant(grid.dim(), grid.side(), alpha);
  const RealField lambda = laplacian_eigenvalues(grid);
  ComplexField spectrum = dft_forward(grid, h);
  spectrum(0) = 0.0;
  for (Index a = 1; a < grid.size(); ++a) spectrum(a) *= -cn / lambda(a);

  ScalingKernel kernel;
  kernel.alpha = alpha;
  kernel.values = dft_inverse(grid, spectrum).real();
  kernel.power_sum = kernel.values.abs().pow(alpha).sum();
  const double mass = kernel.values.abs().sum();
  kernel.zero_mode_residual = mass > 0.0 ? std::abs(kernel.values.sum()) / mass : 0.0;
  return kernel;
}

double pair_field(const ScalingKernel& kernel, const RealField& sigma) {
  if (sigma.size() != kernel.values.size()) throw std::invalid_argument("pair_field: grid mismatch");
  return (kernel.values * sigma).sum();
}

double pair_odometer(const TorusGrid& grid, const TestFunction& f, double alpha, const RealField& u) {
  require_same_size(grid, u.size(), "pair_odometer");
  return scaling_constant(grid.dim(), grid.side(), alpha) * (cell_integrals(grid, f) * u).sum();
}

double exact_cf_finite_n(const ScalingKernel& kernel, double scale) {
  if (!(scale >= 0.0)) throw std::invalid_argument("exact_cf_finite_n: scale must be nonnegative");
  return std::exp(-std::pow(scale, kernel.alpha) * kernel.power_sum);
}

McCf mc_cf(const TorusGrid& grid, const ScalingKernel& kernel, const HeavyTailLaw& law, long replicas,
           std::uint64_t seed, double theta) {
  law.validate();
  if (replicas < 1) throw std::invalid_argument("mc_cf: replicas must be positive");
  require_same_size(grid, kernel.values.size(), "mc_cf");
  std::vector<double> pairing(static_cast<std::size_t>(replicas));
  parallel_for(replicas, [&](long r) {
    RandomStream stream(seed, "mc-cf", static_cast<std::uint64_t>(r));
    pairing[static_cast<std::size_t>(r)] = pair_field(kernel, sample_field(law, stream, grid.size()));
  });
  double re = 0.0;
  double im = 0.0;
  double re2 = 0.0;
  for (double p : pairing) {
    const double c = std::cos(theta * p);
    re += c;
    re2 += c * c;
    im += std::sin(theta * p);
  }
  const double m = static_cast<double>(replicas);
  McCf out;
  out.replicas = replicas;
  out.value = {re / m, im / m};
  out.stderr_ = 1.0 / std::sqrt(m);
  out.sample_stderr = replicas > 1 ? std::sqrt(std::max(0.0, (re2 - re * re / m) / (m - 1.0)) / m) : 0.0;
  return out;
}

namespace {

struct WeightedMode {
  std::vector<int> z;
  std::complex<double> w;  // f^(z) / |z|^2
};

// Integral over [0, 1] of |q(t)|^alpha, q(t) = sum_k b_k exp(-2 pi i k t),
// split at the sign changes of q.
double inner_integral(const std::vector<std::pair<int, std::complex<double>>>& coeffs, int degree, double alpha,
                      int points) {
  auto q = [&](double t) {
    double acc = 0.0;
    for (const auto& [k, b] : coeffs) acc += (b * std::polar(1.0, -kTwoPi * k * t)).real();
    return acc;
  };
  const int samples = 32 * degree + 32;
  std::vector<double> values(static_cast<std::size_t>(samples) + 1);
  for (int i = 0; i <= samples; ++i) values[static_cast<std::size_t>(i)] = q(static_cast<double>(i) / samples);
  std::vector<double> roots;
  for (int i = 0; i < samples; ++i) {
    double a = static_cast<double>(i) / samples;
    double b = static_cast<double>(i + 1) / samples;
    double fa = values[static_cast<std::size_t>(i)];
    const double fb = values[static_cast<std::size_t>(i + 1)];
    if (fa == 0.0) {
      roots.push_back(a);
      continue;
    }
    if ((fa < 0.0) == (fb < 0.0) || fb == 0.0) continue;
    for (int iter = 0; iter < 100 && b - a > 4e-16; ++iter) {
      const double mid = 0.5 * (a + b);
      const double fm = q(mid);
      if ((fm < 0.0) == (fa < 0.0)) {
        a = mid;
        fa = fm;
      } else {
        b = mid;
      }
    }
    roots.push_back(0.5 * (a + b));
  }
  auto piece = [&](double t) { return std::pow(std::abs(q(t)), alpha); };
  if (roots.empty()) return integrate(piece, 0.0, 1.0, points);
  // |q|^alpha behaves like |t - root|^alpha at each end; the substitution
  // t = a + (b - a) I_s(4, 4) turns that into s^{4 alpha + 3}.
  auto between = [&](double a, double b) {
    auto mapped = [&](double s) {
      const double s2 = s * s;
      const double phi = s2 * s2 * (35.0 - 84.0 * s + 70.0 * s2 - 20.0 * s2 * s);
      const double r = s * (1.0 - s);
      return 140.0 * r * r * r * piece(a + (b - a) * phi);
    };
    return (b - a) * integrate(mapped, 0.0, 1.0, points);
  };
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < roots.size(); ++i) acc += between(roots[i], roots[i + 1]);
  acc += between(roots.back(), roots.front() + 1.0);
  return acc;
}

double limit_at(const std::vector<WeightedMode>& modes, int dim, int inner_axis, double alpha, int points) {
  std::vector<int> outer;
  for (int j = 0; j < dim; ++j) {
    if (j != inner_axis) outer.push_back(j);
  }
  int degree = 0;
  for (const auto& m : modes) degree = std::max(degree, std::abs(m.z[static_cast<std::size_t>(inner_axis)]));
  const auto& rule = gauss_legendre(points);
  const std::size_t outer_count = outer.size();
  long total = 1;
  for (std::size_t j = 0; j < outer_count; ++j) total *= points;

  std::vector<double> contributions(static_cast<std::size_t>(total));
  parallel_for(total, [&](long flat) {
    double weight = 1.0;
    std::vector<double> x(static_cast<std::size_t>(dim), 0.0);
    long rest = flat;
    for (std::size_t j = 0; j < outer_count; ++j) {
      const auto node = static_cast<std::size_t>(rest % points);
      rest /= points;
      x[static_cast<std::size_t>(outer[j])] = 0.5 * (rule.nodes[node] + 1.0);
      weight *= 0.5 * rule.weights[node];
    }
    std::map<int, std::complex<double>> grouped;
    for (const auto& m : modes) {
      double phase = 0.0;
      for (int j : outer) phase += m.z[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(j)];
      grouped[m.z[static_cast<std::size_t>(inner_axis)]] += m.w * std::polar(1.0, -kTwoPi * phase);
    }
    std::vector<std::pair<int, std::complex<double>>> coeffs(grouped.begin(), grouped.end());
    contributions[static_cast<std::size_t>(flat)] = weight * inner_integral(coeffs, degree, alpha, points);
  });
  double acc = 0.0;
  for (double c : contributions) acc += c;
  return acc;
}

}  // namespace

LimitValue limit_functional(const TestFunction& f, double alpha, int points) {
  if (!(alpha > 0.0 && alpha <= 2.0)) throw std::invalid_argument("limit_functional: alpha must lie in (0, 2]");
  if (points < 2) throw std::invalid_argument("limit_functional: need at least 2 quadrature points");
  LimitValue out;
  out.points = 2 * points;
  if (f.empty()) return out;
  std::vector<WeightedMode> modes;
  std::vector<int> extent(static_cast<std::size_t>(f.dim()), 0);
  for (const auto& [z, c] : f.modes()) {
    double norm2 = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) {
      norm2 += static_cast<double>(z[j]) * z[j];
      extent[j] = std::max(extent[j], std::abs(z[j]));
    }
    modes.push_back({z, c / norm2});
  }
  const int inner_axis = static_cast<int>(std::max_element(extent.begin(), extent.end()) - extent.begin());
  const double coarse = limit_at(modes, f.dim(), inner_axis, alpha, points);
  out.value = limit_at(modes, f.dim(), inner_axis, alpha, 2 * points);
  out.relative_error = out.value > 0.0 ? std::abs(coarse - out.value) / out.value : 0.0;
  return out;
}

Sweep convergence_sweep(const TestFunction& f, double alpha, std::span<const int> ns) {
  Sweep sweep;
  const double limit = limit_functional(f, alpha).value;
  std::vector<double> xs;
  std::vector<double> ys;
  for (int n : ns) {
    const TorusGrid grid(f.dim(), n);
    SweepRow row;
    row.n = n;
    row.kernel_sum = kernel_kn(grid, f, alpha).power_sum;
    row.limit = limit;
    row.gap = limit > 0.0 ? std::abs(row.kernel_sum - limit) / limit : std::abs(row.kernel_sum);
    if (row.gap > 0.0) {
      xs.push_back(std::log(static_cast<double>(n)));
      ys.push_back(std::log(row.gap));
    }
    sweep.rows.push_back(row);
  }
  if (xs.size() >= 2) {
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxy += (xs[i] - mx) * (ys[i] - my);
      sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    sweep.rate = sxy / sxx;
  }
  return sweep;
}

std::vector<SupRow> kn_sup_check(const TestFunction& f, double alpha, std::span<const int> ns) {
  std::vector<SupRow> rows;
  for (int n : ns) {
    const TorusGrid grid(f.dim(), n);
    const ScalingKernel k = kernel_kn(grid, f, alpha);
    rows.push_back({n, std::pow(static_cast<double>(n), f.dim() / alpha) * k.values.abs().maxCoeff()});
  }
  return rows;
}

double band_ratio(std::span<const SupRow> rows) {
  if (rows.empty()) return 1.0;
  double lo = rows.front().normalized_sup;
  double hi = lo;
  for (const auto& r : rows) {
    lo = std::min(lo, r.normalized_sup);
    hi = std::max(hi, r.normalized_sup);
  }
  if (hi == 0.0) return 1.0;
  return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
}

std::vector<DiscrepancyRow> fourier_discrepancy(const TestFunction& f, std::span<const int> ns) {
  std::vector<DiscrepancyRow> rows;
  const int d = f.dim();
  const int reach = std::max(1, 2 * f.support_radius());
  const TorusGrid window(d, 2 * reach + 1);
  for (int n : ns) {
    const TorusGrid grid(d, n);
    RealField samples(grid.size());
    Eigen::VectorXd x(d);
    for (Index y = 0; y < grid.size(); ++y) {
      x = grid.coords(y).cast<double>() / n;
      samples(y) = f(x);
    }
    std::vector<std::complex<double>> roots(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) roots[static_cast<std::size_t>(k)] = std::polar(1.0, -kTwoPi * k / n);
    double worst = 0.0;
    for (Index wz = 0; wz < window.size(); ++wz) {
      const Coord z = window.coords(wz).array() - reach;
      std::complex<double> acc = 0.0;
      for (Index y = 0; y < grid.size(); ++y) {
        const Coord w = grid.coords(y);
        long phase = 0;
        for (int j = 0; j < d; ++j) phase += static_cast<long>(w(j)) * z(j);
        phase %= n;
        if (phase < 0) phase += n;
        acc += samples(y) * roots[static_cast<std::size_t>(phase)];
      }
      acc /= static_cast<double>(grid.size());
      worst = std::max(worst, std::abs(acc - f.coefficient(z)));
    }
    rows.push_back({n, worst, n * worst});
  }
  return rows;
}

CouplingProbe coupling_probe(int dim, std::span<const int> ns, const TestFunction& f, double alpha,
                             const HeavyTailLaw& first, const HeavyTailLaw& second, long replicas,
                             std::span<const double> eps, std::uint64_t seed) {
  first.validate();
  second.validate();
  if (replicas < 1) throw std::invalid_argument("coupling_probe: replicas must be positive");
  if (f.dim() != dim) throw std::invalid_argument("coupling_probe: dimension mismatch");
  CouplingProbe probe;
  probe.eps.assign(eps.begin(), eps.end());
  long clipped_total = 0;
  for (int n : ns) {
    const TorusGrid grid(dim, n);
    const ScalingKernel kernel = kernel_kn(grid, f, alpha);
    const double norm = std::pow(static_cast<double>(n), -dim / alpha);
    std::vector<double> remainder(static_cast<std::size_t>(replicas));
    std::vector<double> distance(static_cast<std::size_t>(replicas));
    std::vector<long> clipped(static_cast<std::size_t>(replicas));
    parallel_for(replicas, [&](long r) {
      RandomStream stream(seed, "coupling-" + std::to_string(n), static_cast<std::uint64_t>(r));
      double acc = 0.0;
      double l1 = 0.0;
      long clips = 0;
      for (Index x = 0; x < grid.size(); ++x) {
        const double p = stream.uniform();
        const double diff = quantile(first, p) - quantile(second, p);
        clips += quantile_clipped(first, p) || quantile_clipped(second, p);
        acc += kernel.values(x) * diff;
        l1 += std::abs(diff);
      }
      remainder[static_cast<std::size_t>(r)] = acc;
      distance[static_cast<std::size_t>(r)] = norm * l1;
      clipped[static_cast<std::size_t>(r)] = clips;
    });
    CouplingRow row;
    row.n = n;
    for (double e : probe.eps) {
      long hits = 0;
      for (double v : remainder) hits += std::abs(v) > e;
      row.exceedance.push_back(static_cast<double>(hits) / static_cast<double>(replicas));
    }
    double l1 = 0.0;
    for (double v : distance) l1 += v;
    row.l1_distance = l1 / static_cast<double>(replicas);
    for (long c : clipped) row.clipped += c;
    clipped_total += row.clipped;
    probe.rows.push_back(std::move(row));
  }
  if (clipped_total > 0) {
    probe.warnings.push_back("quantile table coverage exceeded: " + std::to_string(clipped_total) +
                             " draws used the asymptotic tail form");
  }
  return probe;
}

std::vector<StabilityRow> stability_property_check(std::span<const TestFunction> fs, double alpha, double a,
                                                   double b) {
  if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("stability_property_check: a and b must be positive");
  std::vector<StabilityRow> rows;
  const double c = std::pow(std::pow(a, alpha) + std::pow(b, alpha), 1.0 / alpha);
  for (const auto& f : fs) {
    StabilityRow row;
    row.lhs = limit_functional(a * f, alpha).value + limit_functional(b * f, alpha).value;
    row.rhs = limit_functional(c * f, alpha).value;
    row.pass = std::abs(row.lhs - row.rhs) <= 1e-10 * std::max(1.0, std::abs(row.rhs));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace sandpile
