#ifndef SANDPILE_TORUS_HPP
#define SANDPILE_TORUS_HPP

#include <array>
#include <complex>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace sandpile {

using Index = Eigen::Index;

/// Largest lattice dimension any routine accepts.
inline constexpr int kMaxDim = 8;

/// Lattice vector with at most kMaxDim components; lives on the stack.
using Coord = Eigen::Matrix<int, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

/// One value per lattice site.
template <typename Scalar>
using Field = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

using RealField = Field<double>;
using ComplexField = Field<std::complex<double>>;

/// The discrete torus Z_n^d.
///
/// Sites are stored row-major with axis 0 slowest. Storage coordinates run over
/// 0..n-1 on every axis; `centered` maps them to the fundamental domain
/// [-n/2, n/2)^d. For n = 2 both neighbours along an axis coincide, so the
/// neighbour multiset carries a doubled edge.
class TorusGrid {
 public:
  TorusGrid(int dim, int side);

  int dim() const { return dim_; }
  int side() const { return side_; }
  Index size() const { return size_; }
  int degree() const { return 2 * dim_; }
  Index stride(int axis) const { return strides_[static_cast<std::size_t>(axis)]; }

  Coord coords(Index site) const;
  Coord centered(Index site) const;
  /// Index of a lattice vector, reduced modulo n on every axis.
  Index index(const Coord& x) const;
  /// Neighbour of `site` along `axis`, `step` = +1 or -1, with wraparound.
  Index neighbor(Index site, int axis, int step) const;

  bool operator==(const TorusGrid& other) const {
    return dim_ == other.dim_ && side_ == other.side_;
  }

 private:
  int dim_;
  int side_;
  Index size_;
  std::array<Index, kMaxDim> strides_{};
};

void require_same_size(const TorusGrid& grid, Index size, const char* what);

/// Unnormalised graph Laplacian: (Lv)(x) = sum_{y~x} (v(y) - v(x)).
template <typename Derived>
Field<typename Derived::Scalar> laplacian(const TorusGrid& grid,
                                          const Eigen::ArrayBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  require_same_size(grid, v.size(), "laplacian");
  const Index n = grid.side();
  Field<Scalar> out = Field<Scalar>::Zero(v.size());
  const auto& in = v.derived();
  for (int axis = 0; axis < grid.dim(); ++axis) {
    const Index s = grid.stride(axis);
    const Index block = s * n;
    for (Index start = 0; start < grid.size(); start += block) {
      for (Index c = 0; c < n; ++c) {
        const Index up = c + 1 == n ? -(n - 1) * s : s;
        const Index down = c == 0 ? (n - 1) * s : -s;
        for (Index r = 0; r < s; ++r) {
          const Index i = start + c * s + r;
          out(i) += in(i + up) + in(i + down) - Scalar(2) * in(i);
        }
      }
    }
  }
  return out;
}

/// Eigenvalue of the Laplacian on the character chi_w: -4 sum_i sin^2(pi w_i / n).
/// Components may be given in 0..n-1 or in [-n/2, n/2).
double laplacian_eigenvalue(const TorusGrid& grid, const Coord& w);
double laplacian_eigenvalue(const TorusGrid& grid, Index mode);
/// All eigenvalues, indexed like sites.
RealField laplacian_eigenvalues(const TorusGrid& grid);

/// Character chi_w(x) = exp(2 pi i x.w / n).
std::complex<double> character(const TorusGrid& grid, const Coord& w, const Coord& x);

/// Forward transform  v^(w) = n^{-d} sum_x v(x) chi_{-w}(x).
ComplexField dft_forward(const TorusGrid& grid, const ComplexField& v);
ComplexField dft_forward(const TorusGrid& grid, const RealField& v);
/// Inverse transform  v(x) = sum_w v^(w) chi_w(x).
ComplexField dft_inverse(const TorusGrid& grid, const ComplexField& spectrum);

/// Direct O(n^{d+1}) transform, used when n is not a power of two.
ComplexField dft_direct(const TorusGrid& grid, const ComplexField& v, bool inverse);

/// Mean-zero solution of Lv = rhs. Throws std::domain_error when rhs does not
/// sum to zero (mass not conserved).
RealField poisson_solve(const TorusGrid& grid, const RealField& rhs);

/// Binary site-field dump: one JSON header line, then little-endian float64
/// values in storage order.
void write_field(std::ostream& out, const TorusGrid& grid, const RealField& values);
void write_field(std::ostream& out, int dim, int side, const RealField& values,
                 const std::string& extra_header_json = {});

struct FieldDump {
  int dim = 0;
  int side = 0;
  RealField values;
  std::string header;
};
FieldDump read_field(std::istream& in);

}  // namespace sandpile

#endif  // SANDPILE_TORUS_HPP
