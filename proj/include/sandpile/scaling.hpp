#ifndef SANDPILE_SCALING_HPP
#define SANDPILE_SCALING_HPP

#include <complex>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sandpile/stable_laws.hpp"
#include "sandpile/torus.hpp"

namespace sandpile {

/// Real trigonometric polynomial f(x) = sum_z f^(z) exp(2 pi i z.x) on T^d
/// with finitely many nonzero modes, no zero mode and f^(-z) = conj f^(z).
class TestFunction {
 public:
  using ModeMap = std::map<std::vector<int>, std::complex<double>>;

  explicit TestFunction(int dim);

  /// Parses "z:re[,im];z:re[,im];..." where z is a comma-separated integer
  /// vector. The conjugate mode is added automatically; giving both z and -z
  /// requires consistent coefficients.
  static TestFunction parse(int dim, std::string_view literal);

  /// Sets f^(z) = c and f^(-z) = conj c. Rejects z = 0.
  void set_mode(const Coord& z, std::complex<double> c);

  int dim() const { return dim_; }
  bool empty() const { return modes_.empty(); }
  const ModeMap& modes() const { return modes_; }
  std::complex<double> coefficient(const Coord& z) const;
  /// Largest |z_j| over the support.
  int support_radius() const;

  /// f(x) for x in T^d; throws if the imaginary residue exceeds 1e-12.
  double operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  TestFunction operator+(const TestFunction& other) const;
  TestFunction operator*(double c) const;

  std::string to_string() const;

 private:
  int dim_;
  ModeMap modes_;
};

inline TestFunction operator*(double c, const TestFunction& f) { return f * c; }

/// H_n(z) = integral of f over the cube of side 1/n centred at z = y/n, for
/// every site y of the torus.
RealField cell_integrals(const TorusGrid& grid, const TestFunction& f);

/// c_n = 4 pi^2 n^{d - d/alpha - 2}.
double scaling_constant(int dim, int side, double alpha);

struct ScalingKernel {
  double alpha = 2.0;
  RealField values;
  /// sum_x |k_n(x)|^alpha.
  double power_sum = 0.0;
  /// |sum_x k_n(x)| / sum_x |k_n(x)|.
  double zero_mode_residual = 0.0;
};

/// k_n = c_n (2d)^{-1} sum_z g(., nz) H_n(z), computed as one spectral
/// convolution with the torus Green row.
ScalingKernel kernel_kn(const TorusGrid& grid, const TestFunction& f, double alpha);

/// sum_x k_n(x) sigma(x).
double pair_field(const ScalingKernel& kernel, const RealField& sigma);
/// c_n sum_z u(nz) H_n(z) for an odometer (or potential) u.
double pair_odometer(const TorusGrid& grid, const TestFunction& f, double alpha, const RealField& u);

/// exp(-scale^alpha sum_x |k_n(x)|^alpha): the exact CF at argument 1 of the
/// pairing for SaS(scale) noise.
double exact_cf_finite_n(const ScalingKernel& kernel, double scale);

struct McCf {
  std::complex<double> value;
  double stderr_ = 0.0;  // 1 / sqrt(M)
  double sample_stderr = 0.0;
  long replicas = 0;
};

/// (1/M) sum_r exp(i theta <Xi_n, f>_r) over independent noise fields.
McCf mc_cf(const TorusGrid& grid, const ScalingKernel& kernel, const HeavyTailLaw& law, long replicas,
           std::uint64_t seed, double theta = 1.0);

struct LimitValue {
  double value = 0.0;
  /// |L_Q - L_{2Q}| / L_{2Q}; value is the 2Q result.
  double relative_error = 0.0;
  int points = 0;
};

/// L_alpha(f) = int_{T^d} |sum_z exp(-2 pi i z.x) f^(z) / |z|^2|^alpha dx.
/// Outer axes use tensor Gauss-Legendre; the innermost axis is split at the
/// zeros of the integrand so each piece is smooth.
LimitValue limit_functional(const TestFunction& f, double alpha, int points = 64);

struct SweepRow {
  int n = 0;
  double kernel_sum = 0.0;
  double limit = 0.0;
  double gap = 0.0;
};

struct Sweep {
  std::vector<SweepRow> rows;
  /// Least-squares slope of log gap against log n.
  double rate = 0.0;
};

Sweep convergence_sweep(const TestFunction& f, double alpha, std::span<const int> ns);

struct SupRow {
  int n = 0;
  double normalized_sup = 0.0;  // n^{d/alpha} max |k_n|
};

std::vector<SupRow> kn_sup_check(const TestFunction& f, double alpha, std::span<const int> ns);
/// max / min of the normalized sup column (1 when all are zero).
double band_ratio(std::span<const SupRow> rows);

struct DiscrepancyRow {
  int n = 0;
  double max_discrepancy = 0.0;  // max_z |f^_n(z) - f^(z)|
  double normalized = 0.0;       // n * max_discrepancy
};

/// f^_n(z) = n^{-d} sum_w f(w/n) exp(-2 pi i w.z / n) compared with f^(z) for
/// every z with |z|_inf <= 2 * support radius.
std::vector<DiscrepancyRow> fourier_discrepancy(const TestFunction& f, std::span<const int> ns);

struct CouplingRow {
  int n = 0;
  std::vector<double> exceedance;  // P(|R_n| > eps) per eps
  double l1_distance = 0.0;        // mean of n^{-d/alpha} sum_x |sigma - rho|
  long clipped = 0;                // draws that fell outside the quantile table
};

struct CouplingProbe {
  std::vector<double> eps;
  std::vector<CouplingRow> rows;
  std::vector<std::string> warnings;
};

/// Builds sigma (law `first`) and rho (law `second`) from shared uniforms via
/// their quantile functions and reports R_n = sum_x k_n(x)(sigma(x) - rho(x)).
CouplingProbe coupling_probe(int dim, std::span<const int> ns, const TestFunction& f, double alpha,
                             const HeavyTailLaw& first, const HeavyTailLaw& second, long replicas,
                             std::span<const double> eps, std::uint64_t seed);

struct StabilityRow {
  double lhs = 0.0;  // L(a f) + L(b f)
  double rhs = 0.0;  // L((a^alpha + b^alpha)^{1/alpha} f)
  bool pass = false;
};

/// exp(-L(af)) exp(-L(bf)) = exp(-L((a^alpha + b^alpha)^{1/alpha} f)) to 1e-10.
std::vector<StabilityRow> stability_property_check(std::span<const TestFunction> fs, double alpha, double a,
                                                   double b);

}  // namespace sandpile

#endif  // SANDPILE_SCALING_HPP
