#ifndef SANDPILE_QUADRATURE_HPP
#define SANDPILE_QUADRATURE_HPP

#include <vector>

namespace sandpile {

/// Gauss-Legendre rule on [-1, 1].
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Cached rule with `points` nodes (thread-safe).
const GaussLegendre& gauss_legendre(int points);

template <typename F>
double integrate(F&& f, double a, double b, int points) {
  const auto& rule = gauss_legendre(points);
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    acc += rule.weights[i] * f(mid + half * rule.nodes[i]);
  }
  return half * acc;
}

template <typename F>
double integrate_composite(F&& f, double a, double b, int panels, int points) {
  const double h = (b - a) / panels;
  double acc = 0.0;
  for (int p = 0; p < panels; ++p) acc += integrate(f, a + p * h, a + (p + 1) * h, points);
  return acc;
}

}  // namespace sandpile

#endif  // SANDPILE_QUADRATURE_HPP
