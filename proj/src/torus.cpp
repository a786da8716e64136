#include "sandpile/torus.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <numbers>
#include <ostream>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "json.hpp"

namespace sandpile {

TorusGrid::TorusGrid(int dim, int side) : dim_(dim), side_(side), size_(1) {
  if (dim < 1 || dim > 4) throw std::invalid_argument("torus dimension must be in 1..4");
  if (side < 2) throw std::invalid_argument("torus side must be at least 2");
  for (int axis = dim - 1; axis >= 0; --axis) {
    strides_[static_cast<std::size_t>(axis)] = size_;
    size_ *= side;
  }
}

Coord TorusGrid::coords(Index site) const {
  Coord x(dim_);
  for (int axis = 0; axis < dim_; ++axis) {
    x(axis) = static_cast<int>((site / stride(axis)) % side_);
  }
  return x;
}

Coord TorusGrid::centered(Index site) const {
  Coord x = coords(site);
  for (int axis = 0; axis < dim_; ++axis) {
    if (2 * x(axis) >= side_) x(axis) -= side_;
  }
  return x;
}

Index TorusGrid::index(const Coord& x) const {
  if (x.size() != dim_) throw std::invalid_argument("lattice vector has wrong dimension");
  Index site = 0;
  for (int axis = 0; axis < dim_; ++axis) {
    int c = x(axis) % side_;
    if (c < 0) c += side_;
    site += c * stride(axis);
  }
  return site;
}

Index TorusGrid::neighbor(Index site, int axis, int step) const {
  const Index s = stride(axis);
  const Index c = (site / s) % side_;
  if (step > 0) return c + 1 == side_ ? site - (side_ - 1) * s : site + s;
  return c == 0 ? site + (side_ - 1) * s : site - s;
}

void require_same_size(const TorusGrid& grid, Index size, const char* what) {
  if (size != grid.size()) {
    throw std::invalid_argument(std::string(what) + ": field size does not match grid");
  }
}

double laplacian_eigenvalue(const TorusGrid& grid, const Coord& w) {
  if (w.size() != grid.dim()) throw std::out_of_range("mode has wrong dimension");
  double lambda = 0.0;
  for (int axis = 0; axis < grid.dim(); ++axis) {
    const int c = w(axis);
    if (2 * c < -grid.side() || c >= grid.side()) {
      throw std::out_of_range("mode component outside Z_n");
    }
    const double s = std::sin(std::numbers::pi * c / grid.side());
    lambda -= 4.0 * s * s;
  }
  return lambda;
}

double laplacian_eigenvalue(const TorusGrid& grid, Index mode) {
  if (mode < 0 || mode >= grid.size()) throw std::out_of_range("mode index outside grid");
  return laplacian_eigenvalue(grid, grid.coords(mode));
}

RealField laplacian_eigenvalues(const TorusGrid& grid) {
  std::vector<double> per_axis(static_cast<std::size_t>(grid.side()));
  for (int c = 0; c < grid.side(); ++c) {
    const double s = std::sin(std::numbers::pi * c / grid.side());
    per_axis[static_cast<std::size_t>(c)] = -4.0 * s * s;
  }
  RealField out(grid.size());
  for (Index i = 0; i < grid.size(); ++i) {
    double lambda = 0.0;
    for (int axis = 0; axis < grid.dim(); ++axis) {
      lambda += per_axis[static_cast<std::size_t>((i / grid.stride(axis)) % grid.side())];
    }
    out(i) = lambda;
  }
  return out;
}

std::complex<double> character(const TorusGrid& grid, const Coord& w, const Coord& x) {
  long long dot = 0;
  for (int axis = 0; axis < grid.dim(); ++axis) {
    dot += static_cast<long long>(w(axis)) * x(axis);
  }
  long long r = dot % grid.side();
  if (r < 0) r += grid.side();
  const double phase = 2.0 * std::numbers::pi * static_cast<double>(r) / grid.side();
  return {std::cos(phase), std::sin(phase)};
}

namespace {

using Complex = std::complex<double>;

// Applies a length-n transform to every line along every axis.
template <typename LineTransform>
void transform_lines(const TorusGrid& grid, ComplexField& data, LineTransform&& line) {
  const Index n = grid.side();
  std::vector<Complex> in(static_cast<std::size_t>(n));
  std::vector<Complex> out(static_cast<std::size_t>(n));
  for (int axis = 0; axis < grid.dim(); ++axis) {
    const Index s = grid.stride(axis);
    const Index block = s * n;
    for (Index start = 0; start < grid.size(); start += block) {
      for (Index r = 0; r < s; ++r) {
        for (Index c = 0; c < n; ++c) in[static_cast<std::size_t>(c)] = data(start + c * s + r);
        line(out, in);
        for (Index c = 0; c < n; ++c) data(start + c * s + r) = out[static_cast<std::size_t>(c)];
      }
    }
  }
}

std::vector<Complex> twiddles(int n, double sign) {
  std::vector<Complex> tw(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double phase = sign * 2.0 * std::numbers::pi * k / n;
    tw[static_cast<std::size_t>(k)] = {std::cos(phase), std::sin(phase)};
  }
  return tw;
}

ComplexField transform(const TorusGrid& grid, ComplexField data, bool inverse) {
  const int n = grid.side();
  if (!std::has_single_bit(static_cast<unsigned>(n))) return dft_direct(grid, data, inverse);
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::Unscaled);
  transform_lines(grid, data, [&](std::vector<Complex>& out, const std::vector<Complex>& in) {
    if (inverse) {
      fft.inv(out, in);
    } else {
      fft.fwd(out, in);
    }
  });
  return data;
}

}  // namespace

ComplexField dft_direct(const TorusGrid& grid, const ComplexField& v, bool inverse) {
  require_same_size(grid, v.size(), "dft_direct");
  const int n = grid.side();
  const auto tw = twiddles(n, inverse ? 1.0 : -1.0);
  ComplexField data = v;
  transform_lines(grid, data, [&](std::vector<Complex>& out, const std::vector<Complex>& in) {
    for (int w = 0; w < n; ++w) {
      Complex acc = 0.0;
      for (int x = 0; x < n; ++x) {
        acc += in[static_cast<std::size_t>(x)] * tw[static_cast<std::size_t>((x * w) % n)];
      }
      out[static_cast<std::size_t>(w)] = acc;
    }
  });
  return data;
}

ComplexField dft_forward(const TorusGrid& grid, const ComplexField& v) {
  require_same_size(grid, v.size(), "dft_forward");
  ComplexField out = transform(grid, v, false);
  out /= static_cast<double>(grid.size());
  return out;
}

ComplexField dft_forward(const TorusGrid& grid, const RealField& v) {
  return dft_forward(grid, ComplexField(v.cast<Complex>()));
}

ComplexField dft_inverse(const TorusGrid& grid, const ComplexField& spectrum) {
  require_same_size(grid, spectrum.size(), "dft_inverse");
  return transform(grid, spectrum, true);
}

RealField poisson_solve(const TorusGrid& grid, const RealField& rhs) {
  require_same_size(grid, rhs.size(), "poisson_solve");
  if (!rhs.allFinite()) throw std::invalid_argument("poisson_solve: non-finite right-hand side");
  const double scale = rhs.abs().maxCoeff();
  const double total = rhs.sum();
  if (std::abs(total) > 1e-9 * static_cast<double>(grid.size()) * scale) {
    throw std::domain_error("poisson_solve: right-hand side is not mean-zero (mass not conserved)");
  }
  ComplexField spectrum = dft_forward(grid, rhs);
  const RealField lambda = laplacian_eigenvalues(grid);
  spectrum(0) = 0.0;
  for (Index w = 1; w < grid.size(); ++w) spectrum(w) /= lambda(w);
  return dft_inverse(grid, spectrum).real();
}

namespace {

void write_le_doubles(std::ostream& out, const RealField& values) {
  std::vector<unsigned char> bytes(static_cast<std::size_t>(values.size()) * 8);
  for (Index i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(values(i));
    for (int b = 0; b < 8; ++b) {
      bytes[static_cast<std::size_t>(i) * 8 + static_cast<std::size_t>(b)] =
          static_cast<unsigned char>((bits >> (8 * b)) & 0xffu);
    }
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

void write_field(std::ostream& out, int dim, int side, const RealField& values,
                 const std::string& extra_header_json) {
  nlohmann::ordered_json header;
  header["d"] = dim;
  header["n"] = side;
  header["dtype"] = "f64";
  header["order"] = "row-major, axis 0 slowest";
  if (!extra_header_json.empty()) {
    const auto extra = nlohmann::ordered_json::parse(extra_header_json);
    for (const auto& [key, value] : extra.items()) {
      header[key] = value;
    }
  }
  out << header.dump() << '\n';
  write_le_doubles(out, values);
}

void write_field(std::ostream& out, const TorusGrid& grid, const RealField& values) {
  require_same_size(grid, values.size(), "write_field");
  write_field(out, grid.dim(), grid.side(), values);
}

FieldDump read_field(std::istream& in) {
  FieldDump dump;
  if (!std::getline(in, dump.header)) throw std::runtime_error("read_field: missing header");
  const auto header = nlohmann::json::parse(dump.header);
  if (header.at("dtype") != "f64") throw std::runtime_error("read_field: unsupported dtype");
  dump.dim = header.at("d").get<int>();
  dump.side = header.at("n").get<int>();
  Index count = 1;
  for (int axis = 0; axis < dump.dim; ++axis) count *= dump.side;
  std::vector<unsigned char> bytes(static_cast<std::size_t>(count) * 8);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw std::runtime_error("read_field: truncated payload");
  }
  dump.values.resize(count);
  for (Index i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(bytes[static_cast<std::size_t>(i) * 8 + static_cast<std::size_t>(b)])
              << (8 * b);
    }
    dump.values(i) = std::bit_cast<double>(bits);
  }
  return dump;
}

}  // namespace sandpile
