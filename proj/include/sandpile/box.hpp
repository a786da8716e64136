#ifndef SANDPILE_BOX_HPP
#define SANDPILE_BOX_HPP

#include <array>
#include <cmath>
#include <string>

#include "sandpile/torus.hpp"

namespace sandpile {

/// The box V_m = [-m, m]^d in Z^d with an absorbing exterior.
///
/// Sites are stored row-major with axis 0 slowest; coordinates are centred so
/// the origin sits in the middle. m = 0 is the single-site box.
class BoxDomain {
 public:
  BoxDomain(int dim, int radius);

  int dim() const { return dim_; }
  int radius() const { return radius_; }
  int side() const { return 2 * radius_ + 1; }
  Index size() const { return size_; }
  int degree() const { return 2 * dim_; }
  Index stride(int axis) const { return strides_[static_cast<std::size_t>(axis)]; }

  Coord coords(Index site) const;
  bool contains(const Coord& x) const;
  /// Throws std::out_of_range for sites outside the box.
  Index index(const Coord& x) const;
  Index origin() const { return (size_ - 1) / 2; }

  bool operator==(const BoxDomain& other) const {
    return dim_ == other.dim_ && radius_ == other.radius_;
  }

 private:
  int dim_;
  int radius_;
  Index size_;
  std::array<Index, kMaxDim> strides_{};
};

/// Visits contiguous runs of a row-major cube along `axis`. For every run of
/// sites sharing coordinate c on that axis, calls body(first_site, c, length).
template <typename Body>
void for_each_axis_slab(Index size, Index stride, Index side, Body&& body) {
  const Index block = stride * side;
  for (Index start = 0; start < size; start += block) {
    for (Index c = 0; c < side; ++c) body(start + c * stride, c, stride);
  }
}

/// Dirichlet Laplacian on the box: sum over the 2d neighbours of (v(y) - v(x)),
/// with v = 0 outside.
template <typename Derived>
Field<typename Derived::Scalar> dirichlet_laplacian(const BoxDomain& box,
                                                    const Eigen::ArrayBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  if (v.size() != box.size()) throw std::invalid_argument("dirichlet_laplacian: size mismatch");
  const auto& in = v.derived();
  Field<Scalar> out = Scalar(-box.degree()) * in;
  const Index side = box.side();
  for (int axis = 0; axis < box.dim(); ++axis) {
    const Index s = box.stride(axis);
    for_each_axis_slab(box.size(), s, side, [&](Index i, Index c, Index len) {
      if (c > 0) out.segment(i, len) += in.segment(i - s, len);
      if (c + 1 < side) out.segment(i, len) += in.segment(i + s, len);
    });
  }
  return out;
}

struct SolveInfo {
  long iterations = 0;
  /// Final relative residual ||b - Ax|| / ||b||.
  double residual = 0.0;
  bool converged = false;
};

/// Jacobi-preconditioned conjugate gradient for an SPD operator given as
/// apply(x, y) computing y = A x. `x` holds the initial guess on entry.
template <typename Apply>
SolveInfo conjugate_gradient(Apply&& apply, const RealField& b, RealField& x,
                             const RealField& inverse_diagonal, double rel_tol, long max_iter) {
  SolveInfo info;
  const double bnorm = std::sqrt((b * b).sum());
  if (bnorm == 0.0) {
    x.setZero(b.size());
    info.converged = true;
    return info;
  }
  if (x.size() != b.size()) x.setZero(b.size());
  RealField ax(b.size());
  apply(x, ax);
  RealField r = b - ax;
  RealField z = inverse_diagonal * r;
  RealField p = z;
  double rz = (r * z).sum();
  double rnorm = std::sqrt((r * r).sum());
  while (rnorm > rel_tol * bnorm && info.iterations < max_iter) {
    apply(p, ax);
    const double step = rz / (p * ax).sum();
    x += step * p;
    r -= step * ax;
    z = inverse_diagonal * r;
    const double rz_next = (r * z).sum();
    p = z + (rz_next / rz) * p;
    rz = rz_next;
    rnorm = std::sqrt((r * r).sum());
    ++info.iterations;
  }
  apply(x, ax);
  info.residual = std::sqrt(((b - ax) * (b - ax)).sum()) / bnorm;
  info.converged = info.residual <= 10.0 * rel_tol;
  return info;
}

/// Least u >= 0 on the box with mass + Delta u <= 1 (Dirichlet exterior).
///
/// This is the odometer of the divisible sandpile stabilised inside V_m with
/// mass absorbed at the exterior. Solved by Howard policy iteration: each step
/// fixes the toppling set S, solves -Delta u = mass - 1 on S with u = 0 off S,
/// then resets S to the sites where the equation branch is active.
struct ObstacleResult {
  RealField odometer;
  long policy_iterations = 0;
  long cg_iterations = 0;
  /// max over sites of the violation of the complementarity conditions.
  double residual = 0.0;
  bool converged = false;
};

ObstacleResult stabilize_obstacle(const BoxDomain& box, const RealField& mass,
                                  const RealField& warm_start, double tol);

}  // namespace sandpile

#endif  // SANDPILE_BOX_HPP
