#include "sandpile/box.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <vector>

namespace sandpile {

BoxDomain::BoxDomain(int dim, int radius) : dim_(dim), radius_(radius), size_(1) {
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("box dimension must lie in 1..8");
  if (radius < 0) throw std::invalid_argument("box radius must be nonnegative");
  const Index side = 2 * static_cast<Index>(radius) + 1;
  for (int axis = dim - 1; axis >= 0; --axis) {
    strides_[static_cast<std::size_t>(axis)] = size_;
    if (size_ > std::numeric_limits<Index>::max() / side) throw std::length_error("box too large");
    size_ *= side;
  }
}

Coord BoxDomain::coords(Index site) const {
  if (site < 0 || site >= size_) throw std::out_of_range("box site out of range");
  Coord x(dim_);
  for (int axis = 0; axis < dim_; ++axis) {
    x(axis) = static_cast<int>(site / stride(axis)) - radius_;
    site %= stride(axis);
  }
  return x;
}

bool BoxDomain::contains(const Coord& x) const {
  if (x.size() != dim_) return false;
  for (int axis = 0; axis < dim_; ++axis) {
    if (x(axis) < -radius_ || x(axis) > radius_) return false;
  }
  return true;
}

Index BoxDomain::index(const Coord& x) const {
  if (!contains(x)) throw std::out_of_range("lattice point outside the box");
  Index site = 0;
  for (int axis = 0; axis < dim_; ++axis) site += (x(axis) + radius_) * stride(axis);
  return site;
}

ObstacleResult stabilize_obstacle(const BoxDomain& box, const RealField& mass,
                                  const RealField& warm_start, double tol) {
  if (mass.size() != box.size()) throw std::invalid_argument("stabilize_obstacle: size mismatch");
  if (!mass.allFinite()) throw std::invalid_argument("stabilize_obstacle: non-finite mass");
  const Index size = box.size();
  const double degree = box.degree();
  const RealField rhs = mass - 1.0;

  ObstacleResult result;
  RealField u = warm_start.size() == size ? warm_start.max(0.0).eval() : RealField::Zero(size);
  RealField mask(size);
  auto policy = [&](const RealField& v, RealField& out) {
    const RealField equation = -dirichlet_laplacian(box, v) - rhs;
    out = (equation <= v).cast<double>();
  };
  policy(u, mask);

  const long max_policy = std::min<long>(500, size + 1);
  const long max_cg = 10 * size + 100;
  RealField next_mask(size);
  bool converged = false;
  while (result.policy_iterations < max_policy) {
    ++result.policy_iterations;
    auto apply = [&](const RealField& x, RealField& y) {
      y = mask * (-dirichlet_laplacian(box, (mask * x).eval()));
    };
    const RealField b = mask * rhs;
    u *= mask;
    const RealField inverse_diagonal = mask / degree;
    const SolveInfo info = conjugate_gradient(apply, b, u, inverse_diagonal, tol, max_cg);
    result.cg_iterations += info.iterations;
    policy(u, next_mask);
    if ((next_mask == mask).all()) {
      converged = info.converged;
      break;
    }
    mask = next_mask;
  }

  const RealField settled = mass + dirichlet_laplacian(box, u);
  double violation = std::max(0.0, (-u).maxCoeff());
  violation = std::max(violation, (settled - 1.0).maxCoeff());
  for (Index i = 0; i < size; ++i) {
    if (mask(i) > 0.0) violation = std::max(violation, std::abs(settled(i) - 1.0));
  }
  result.residual = violation;
  const double scale = std::max(1.0, mass.abs().maxCoeff());
  result.converged = converged && violation <= 1e3 * tol * scale;
  result.odometer = std::move(u);
  return result;
}

}  // namespace sandpile
