#include "sandpile/green.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "sandpile/parallel.hpp"
#include "sandpile/quadrature.hpp"
#include "sandpile/rng.hpp"

namespace sandpile {

RealField torus_green_row(const TorusGrid& grid, Index source) {
  if (source < 0 || source >= grid.size()) throw std::out_of_range("torus_green_row: bad source");
  const RealField lambda = laplacian_eigenvalues(grid);
  const double factor = -static_cast<double>(grid.degree()) / static_cast<double>(grid.size());
  ComplexField spectrum(grid.size());
  spectrum(0) = 0.0;
  for (Index a = 1; a < grid.size(); ++a) spectrum(a) = factor / lambda(a);
  const RealField at_origin = dft_inverse(grid, spectrum).real();
  if (source == 0) return at_origin;

  RealField row(grid.size());
  const Coord x = grid.coords(source);
  for (Index y = 0; y < grid.size(); ++y) {
    row(y) = at_origin(grid.index(grid.coords(y) - x));
  }
  return row;
}

KilledGreen killed_green(const BoxDomain& box, Index source, double rel_tol) {
  if (source < 0 || source >= box.size()) throw std::out_of_range("killed_green: source outside box");
  const double degree = box.degree();
  RealField rhs = RealField::Zero(box.size());
  rhs(source) = degree;
  auto apply = [&](const RealField& x, RealField& y) { y = -dirichlet_laplacian(box, x); };
  KilledGreen out;
  out.values = RealField::Zero(box.size());
  const RealField inverse_diagonal = RealField::Constant(box.size(), 1.0 / degree);
  out.solve = conjugate_gradient(apply, rhs, out.values, inverse_diagonal, rel_tol, 10 * box.size());
  if (!out.solve.converged) {
    throw std::runtime_error("killed_green: CG did not converge, relative residual " +
                             std::to_string(out.solve.residual));
  }
  return out;
}

namespace {

// Orthant [0, m]^d stored row-major, axis 0 slowest.
struct Orthant {
  int dim;
  int radius;
  Index size = 1;
  std::array<Index, kMaxDim> strides{};

  Orthant(int d, int m) : dim(d), radius(m) {
    if (d < 1 || d > kMaxDim) throw std::invalid_argument("orthant dimension must lie in 1..8");
    if (m < 0) throw std::invalid_argument("orthant radius must be nonnegative");
    for (int axis = d - 1; axis >= 0; --axis) {
      strides[static_cast<std::size_t>(axis)] = size;
      size *= m + 1;
    }
  }

  Index index(const Coord& y) const {
    Index site = 0;
    for (int axis = 0; axis < dim; ++axis) site += std::abs(y(axis)) * strides[static_cast<std::size_t>(axis)];
    return site;
  }

  RealField weights() const {
    RealField w = RealField::Ones(size);
    const Index side = radius + 1;
    for (int axis = 0; axis < dim; ++axis) {
      for_each_axis_slab(size, strides[static_cast<std::size_t>(axis)], side, [&](Index i, Index c, Index len) {
        if (c > 0) w.segment(i, len) *= 2.0;
      });
    }
    return w;
  }

  // Reflection-reduced -Delta: a neighbour at coordinate -1 is folded onto +1.
  RealField reduced_operator(const RealField& x) const {
    RealField out = static_cast<double>(2 * dim) * x;
    const Index side = radius + 1;
    for (int axis = 0; axis < dim; ++axis) {
      const Index s = strides[static_cast<std::size_t>(axis)];
      for_each_axis_slab(size, s, side, [&](Index i, Index c, Index len) {
        if (c > 0) {
          out.segment(i, len) -= x.segment(i - s, len);
        } else if (radius > 0) {
          out.segment(i, len) -= x.segment(i + s, len);
        }
        if (c < radius) out.segment(i, len) -= x.segment(i + s, len);
      });
    }
    return out;
  }
};

}  // namespace

OrthantGreen killed_green_origin(int dim, int radius, double rel_tol) {
  const Orthant orthant(dim, radius);
  OrthantGreen out;
  out.dim = dim;
  out.radius = radius;
  out.weights = orthant.weights();
  // Weighting by orbit size makes the folded operator symmetric.
  auto apply = [&](const RealField& x, RealField& y) { y = out.weights * orthant.reduced_operator(x); };
  RealField rhs = RealField::Zero(orthant.size);
  rhs(0) = 2.0 * dim;
  const RealField inverse_diagonal = 1.0 / (2.0 * dim * out.weights);
  out.values = RealField::Zero(orthant.size);
  out.solve = conjugate_gradient(apply, rhs, out.values, inverse_diagonal, rel_tol, 10 * orthant.size + 100);
  if (!out.solve.converged) {
    throw std::runtime_error("killed_green_origin: CG did not converge, relative residual " +
                             std::to_string(out.solve.residual));
  }
  return out;
}

double OrthantGreen::at(const Coord& y) const {
  if (y.size() != dim) throw std::invalid_argument("OrthantGreen::at: dimension mismatch");
  for (int axis = 0; axis < dim; ++axis) {
    if (std::abs(y(axis)) > radius) return 0.0;
  }
  return values(Orthant(dim, radius).index(y));
}

RealField OrthantGreen::full() const {
  const BoxDomain box(dim, radius);
  const Orthant orthant(dim, radius);
  RealField out(box.size());
  for (Index site = 0; site < box.size(); ++site) out(site) = values(orthant.index(box.coords(site)));
  return out;
}

MonteCarloGreen killed_green_mc(const BoxDomain& box, Index source, long walks, std::uint64_t seed) {
  if (source < 0 || source >= box.size()) throw std::out_of_range("killed_green_mc: source outside box");
  if (walks < 1) throw std::invalid_argument("killed_green_mc: walks must be positive");
  const Index size = box.size();
  const int dim = box.dim();
  const int m = box.radius();
  const Coord start = box.coords(source);

  constexpr long kChunks = 64;
  std::vector<RealField> sums(kChunks, RealField::Zero(size));
  std::vector<RealField> squares(kChunks, RealField::Zero(size));
  parallel_for(kChunks, [&](long chunk) {
    std::vector<int> counts(static_cast<std::size_t>(size), 0);
    std::vector<Index> touched;
    RealField& sum = sums[static_cast<std::size_t>(chunk)];
    RealField& square = squares[static_cast<std::size_t>(chunk)];
    for (long w = chunk * walks / kChunks; w < (chunk + 1) * walks / kChunks; ++w) {
      RandomStream stream(seed, "killed-green-walk", static_cast<std::uint64_t>(w));
      Coord x = start;
      Index site = source;
      while (true) {
        if (counts[static_cast<std::size_t>(site)]++ == 0) touched.push_back(site);
        const std::uint32_t move = stream.below(static_cast<std::uint32_t>(2 * dim));
        const int axis = static_cast<int>(move / 2);
        const int step = (move & 1U) ? 1 : -1;
        x(axis) += step;
        if (x(axis) < -m || x(axis) > m) break;
        site += step * box.stride(axis);
      }
      for (Index t : touched) {
        const double c = counts[static_cast<std::size_t>(t)];
        sum(t) += c;
        square(t) += c * c;
        counts[static_cast<std::size_t>(t)] = 0;
      }
      touched.clear();
    }
  });

  RealField sum = RealField::Zero(size);
  RealField square = RealField::Zero(size);
  for (long c = 0; c < kChunks; ++c) {
    sum += sums[static_cast<std::size_t>(c)];
    square += squares[static_cast<std::size_t>(c)];
  }
  MonteCarloGreen out;
  out.walks = walks;
  const double n = static_cast<double>(walks);
  out.mean = sum / n;
  if (walks > 1) {
    const RealField variance = ((square - n * out.mean.square()) / (n - 1.0)).max(0.0);
    out.stderr_ = (variance / n).sqrt();
  } else {
    out.stderr_ = RealField::Zero(size);
  }
  return out;
}

double nu_alpha(const OrthantGreen& green, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("nu_alpha: alpha must be positive");
  return std::pow((green.weights * green.values.max(0.0).pow(alpha)).sum(), 1.0 / alpha);
}

double nu_alpha(int dim, int radius, double alpha) {
  return nu_alpha(killed_green_origin(dim, radius), alpha);
}

double scaled_bessel_i(int k, double x) {
  if (k < 0) k = -k;
  if (x < 0.0) throw std::invalid_argument("scaled_bessel_i: x must be nonnegative");
  if (x == 0.0) return k == 0 ? 1.0 : 0.0;
  if (x <= 600.0) return std::cyl_bessel_i(static_cast<double>(k), x) * std::exp(-x);
  // Large-argument expansion; converges quickly while 4k^2 << 8x.
  const double mu = 4.0 * k * k;
  double term = 1.0;
  double acc = 1.0;
  for (int j = 1; j < 60; ++j) {
    const double odd = 2.0 * j - 1.0;
    const double next = -term * (mu - odd * odd) / (j * 8.0 * x);
    if (std::abs(next) > std::abs(term)) break;
    term = next;
    acc += term;
    if (std::abs(term) < 1e-17 * std::abs(acc)) break;
  }
  return acc / std::sqrt(2.0 * std::numbers::pi * x);
}

LatticeGreen::LatticeGreen(int dim) : dim_(dim) {
  if (dim < 3 || dim > kMaxDim) {
    throw std::invalid_argument("lattice Green function needs 3 <= d <= 8 (recurrent for d < 3)");
  }
}

double LatticeGreen::operator()(const Coord& y) const {
  if (y.size() != dim_) throw std::invalid_argument("LatticeGreen: dimension mismatch");
  std::vector<int> key(static_cast<std::size_t>(dim_));
  for (int j = 0; j < dim_; ++j) key[static_cast<std::size_t>(j)] = std::abs(y(j));
  std::sort(key.begin(), key.end());
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  const double value = evaluate(key);
  std::lock_guard lock(mutex_);
  cache_.emplace(key, value);
  return value;
}

double LatticeGreen::evaluate(const std::vector<int>& key) const {
  const double d = dim_;
  auto heat_kernel = [&](double t) {
    double p = 1.0;
    for (int k : key) p *= scaled_bessel_i(k, t / d);
    return p;
  };
  constexpr double kUpper = 1e6;
  double value = integrate_composite(heat_kernel, 0.0, 1.0, 2, 20);
  auto in_log_time = [&](double s) {
    const double t = std::exp(s);
    return t * heat_kernel(t);
  };
  value += integrate_composite(in_log_time, 0.0, std::log(kUpper), 140, 16);
  // Tail from the large-t expansion of the heat kernel.
  const double half = 0.5 * d;
  const double lead = std::pow(d / (2.0 * std::numbers::pi), half);
  double correction = 0.0;
  for (int k : key) correction += 4.0 * k * k - 1.0;
  value += lead * std::pow(kUpper, 1.0 - half) / (half - 1.0);
  value -= (d / 8.0) * correction * lead * std::pow(kUpper, -half) / half;
  return value;
}

std::vector<Coord> shell(int dim, int r) {
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("shell: bad dimension");
  if (r < 0) throw std::invalid_argument("shell: negative radius");
  std::vector<Coord> out;
  Coord y = Coord::Constant(dim, -r);
  while (true) {
    if (y.cwiseAbs().maxCoeff() == r) out.push_back(y);
    int axis = dim - 1;
    while (axis >= 0 && y(axis) == r) {
      y(axis) = -r;
      --axis;
    }
    if (axis < 0) break;
    ++y(axis);
  }
  return out;
}

std::vector<Coord> shell_enumeration(int dim, long count) {
  std::vector<Coord> out;
  if (count <= 0) return out;
  out.reserve(static_cast<std::size_t>(count));
  for (int r = 0; static_cast<long>(out.size()) < count; ++r) {
    for (auto& y : shell(dim, r)) {
      if (static_cast<long>(out.size()) == count) break;
      out.push_back(std::move(y));
    }
  }
  return out;
}

GreenSeries lattice_green_series(int dim, double beta, int radius) {
  if (dim < 3) throw std::invalid_argument("lattice_green_series: d < 3 is recurrent, the integral diverges");
  if (!(beta > 0.0)) throw std::invalid_argument("lattice_green_series: beta must be positive");
  if (radius < 0) throw std::invalid_argument("lattice_green_series: negative radius");
  const LatticeGreen g(dim);
  GreenSeries out;
  out.radius = radius;
  out.beta = beta;
  double acc = 0.0;
  for (int r = 0; r <= radius; ++r) {
    double shell_sum = 0.0;
    for (const auto& y : shell(dim, r)) shell_sum += std::pow(g(y), beta);
    acc += shell_sum;
    out.partial_sums.push_back(acc);
    out.last_shell = shell_sum;
  }
  out.total = acc;
  return out;
}

}  // namespace sandpile
