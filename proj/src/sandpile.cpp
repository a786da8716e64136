#include "sandpile/sandpile.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "sandpile/parallel.hpp"

namespace sandpile {

namespace {

template <typename... F>
struct Overloaded : F... {
  using F::operator()...;
};
template <typename... F>
Overloaded(F...) -> Overloaded<F...>;

RealField domain_laplacian(const Domain& domain, const RealField& v) {
  return std::visit(Overloaded{[&](const TorusGrid& g) { return laplacian(g, v); },
                               [&](const BoxDomain& b) { return dirichlet_laplacian(b, v); }},
                    domain);
}

Coord domain_coords(const Domain& domain, Index site) {
  return std::visit([&](const auto& d) { return d.coords(site); }, domain);
}

// Box site paired with the exterior site it pushes mass to, indexed in the
// box of radius m + 1.
std::vector<std::pair<Index, Index>> exterior_links(const BoxDomain& box) {
  std::vector<std::pair<Index, Index>> links;
  const BoxDomain frame(box.dim(), box.radius() + 1);
  for (Index site = 0; site < box.size(); ++site) {
    const Coord x = box.coords(site);
    for (int axis = 0; axis < box.dim(); ++axis) {
      for (int step : {-1, 1}) {
        Coord y = x;
        y(axis) += step;
        if (!box.contains(y)) links.emplace_back(site, frame.index(y));
      }
    }
  }
  return links;
}

}  // namespace

Index domain_size(const Domain& domain) {
  return std::visit([](const auto& d) { return d.size(); }, domain);
}

int domain_dim(const Domain& domain) {
  return std::visit([](const auto& d) { return d.dim(); }, domain);
}

std::string describe(const Domain& domain) {
  std::ostringstream out;
  std::visit(Overloaded{[&](const TorusGrid& g) { out << "torus(d=" << g.dim() << ", n=" << g.side() << ')'; },
                        [&](const BoxDomain& b) { out << "box(d=" << b.dim() << ", m=" << b.radius() << ')'; }},
             domain);
  return out.str();
}

MassField init_configuration(const Domain& domain, const HeavyTailLaw& law, double mean, bool conserve,
                             std::uint64_t seed, std::uint64_t replica) {
  law.validate();
  if (!std::isfinite(mean)) throw std::invalid_argument("init_configuration: mean must be finite");
  const bool on_torus = std::holds_alternative<TorusGrid>(domain);
  if (conserve && !on_torus) throw std::invalid_argument("init_configuration: conserve requires a torus");
  if (conserve && mean != 1.0) throw std::invalid_argument("init_configuration: conserve requires mean = 1");

  MassField field{domain, {}, {}};
  RandomStream stream(seed, "configuration", replica);
  const RealField sigma = sample_field(law, stream, domain_size(domain));
  if (conserve) {
    field.mass = 1.0 + (sigma - sigma.mean());
  } else {
    field.mass = mean + sigma;
  }
  if (!field.mass.allFinite()) throw std::runtime_error("init_configuration: non-finite mass sampled");
  if (const auto* box = std::get_if<BoxDomain>(&domain)) {
    field.absorbed = RealField::Zero(BoxDomain(box->dim(), box->radius() + 1).size());
  }
  return field;
}

std::string to_string(Schedule schedule) {
  return schedule == Schedule::Synchronous ? "synchronous" : "checkerboard";
}

Schedule parse_schedule(std::string_view name) {
  if (name == "synchronous" || name == "sync") return Schedule::Synchronous;
  if (name == "checkerboard") return Schedule::Checkerboard;
  throw std::invalid_argument("unknown schedule '" + std::string(name) + "'");
}

ToppleResult topple_to_stability(const MassField& config, double tol, long max_rounds, Schedule schedule) {
  if (!(tol > 0.0)) throw std::invalid_argument("topple_to_stability: tol must be positive");
  const Index size = domain_size(config.domain);
  if (config.mass.size() != size) throw std::invalid_argument("topple_to_stability: size mismatch");
  if (!config.mass.allFinite()) throw std::invalid_argument("topple_to_stability: non-finite mass");
  const auto* box = std::get_if<BoxDomain>(&config.domain);
  if (!box) {
    const double n = static_cast<double>(size);
    if (std::abs(config.mass.sum() - n) > 1e-9 * n) {
      throw std::invalid_argument("topple_to_stability: torus configuration must conserve mass (sum s = n^d)");
    }
  }
  const double share = 1.0 / (2.0 * domain_dim(config.domain));
  const auto links = box ? exterior_links(*box) : std::vector<std::pair<Index, Index>>{};

  std::vector<RealField> colors;
  if (schedule == Schedule::Synchronous) {
    colors.push_back(RealField::Ones(size));
  } else {
    RealField even(size);
    for (Index i = 0; i < size; ++i) even(i) = domain_coords(config.domain, i).sum() % 2 == 0 ? 1.0 : 0.0;
    colors.push_back(even);
    colors.push_back(1.0 - even);
  }

  ToppleResult result{config, {config.domain, RealField::Zero(size)}, 0, false, 0.0, 0.0};
  RealField& s = result.final.mass;
  RealField& u = result.odometer.values;
  if (box && result.final.absorbed.size() == 0) {
    result.final.absorbed = RealField::Zero(BoxDomain(box->dim(), box->radius() + 1).size());
  }
  const double scale = std::max(1.0, config.mass.abs().maxCoeff());
  auto check_identity = [&] {
    result.identity_residual = (config.mass + domain_laplacian(config.domain, u) - s).abs().maxCoeff();
    if (result.identity_residual > 1e-9 * scale) {
      throw std::logic_error("toppling identity s0 + Delta u = s violated: residual " +
                             std::to_string(result.identity_residual));
    }
  };

  while (true) {
    result.max_excess = std::max(0.0, (s - 1.0).maxCoeff());
    if (result.max_excess < tol) {
      result.stabilized = true;
      break;
    }
    if (result.rounds >= max_rounds) break;
    for (const auto& color : colors) {
      const RealField sent = ((s - 1.0).max(0.0) * color * share).eval();
      u += sent;
      s += domain_laplacian(config.domain, sent);
      for (const auto& [site, outside] : links) result.final.absorbed(outside) += sent(site);
    }
    ++result.rounds;
    if (result.rounds % 100 == 0) check_identity();
  }
  check_identity();
  return result;
}

OdometerField odometer_exact(const TorusGrid& grid, const RealField& mass) {
  require_same_size(grid, mass.size(), "odometer_exact");
  const double n = static_cast<double>(grid.size());
  if (std::abs(mass.sum() - n) > 1e-9 * n) {
    throw std::invalid_argument("odometer_exact: configuration must conserve mass (sum s = n^d)");
  }
  const RealField rhs = 1.0 - mass;
  const RealField v = poisson_solve(grid, rhs);
  OdometerField out{grid, v - v.minCoeff()};
  const double residual = (laplacian(grid, out.values) - rhs).abs().maxCoeff();
  if (residual > 1e-9 * std::max(1.0, rhs.abs().maxCoeff())) {
    throw std::logic_error("odometer_exact: Delta u = 1 - s violated, residual " + std::to_string(residual));
  }
  return out;
}

std::string to_string(NestedMethod method) {
  return method == NestedMethod::Obstacle ? "obstacle" : "toppling";
}

NestedMethod parse_nested_method(std::string_view name) {
  if (name == "obstacle") return NestedMethod::Obstacle;
  if (name == "toppling") return NestedMethod::Toppling;
  throw std::invalid_argument("unknown nested method '" + std::string(name) + "'");
}

NestedTrace nested_stabilize(int dim, const HeavyTailLaw& law, double mean, std::span<const int> radii,
                             double tol, std::uint64_t seed, std::uint64_t replica, NestedMethod method) {
  law.validate();
  if (radii.empty()) throw std::invalid_argument("nested_stabilize: empty radius list");
  for (std::size_t k = 0; k < radii.size(); ++k) {
    if (radii[k] < 0 || (k > 0 && radii[k] <= radii[k - 1])) {
      throw std::invalid_argument("nested_stabilize: radii must be nonnegative and strictly increasing");
    }
  }
  const BoxDomain largest(dim, radii.back());
  RandomStream stream(seed, "nested-field", replica);
  const RealField field = mean + sample_field(law, stream, largest.size());

  NestedTrace trace;
  RealField previous;
  std::optional<BoxDomain> previous_box;
  for (int m : radii) {
    const BoxDomain box(dim, m);
    RealField mass(box.size());
    for (Index site = 0; site < box.size(); ++site) mass(site) = field(largest.index(box.coords(site)));

    double value = 0.0;
    long work = 0;
    double residual = 0.0;
    bool ok = true;
    RealField odometer;
    if (method == NestedMethod::Obstacle) {
      RealField warm = RealField::Zero(box.size());
      if (previous_box) {
        for (Index site = 0; site < previous_box->size(); ++site) {
          warm(box.index(previous_box->coords(site))) = previous(site);
        }
      }
      ObstacleResult solved = stabilize_obstacle(box, mass, warm, tol);
      work = solved.policy_iterations + solved.cg_iterations;
      residual = solved.residual;
      ok = solved.converged;
      odometer = std::move(solved.odometer);
    } else {
      MassField config{box, mass, RealField::Zero(BoxDomain(dim, m + 1).size())};
      ToppleResult toppled = topple_to_stability(config, tol);
      work = toppled.rounds;
      residual = toppled.max_excess;
      ok = toppled.stabilized;
      odometer = std::move(toppled.odometer.values);
    }
    if (!ok) {
      trace.complete = false;
      trace.flag = "not stabilized at tolerance (m=" + std::to_string(m) + ")";
      break;
    }
    value = odometer(box.origin());
    if (!trace.origin_odometer.empty()) {
      const double before = trace.origin_odometer.back();
      if (value < before - 1e-7 * std::max(1.0, std::abs(before))) {
        trace.monotone = false;
        if (trace.flag.empty()) trace.flag = "origin odometer decreased at m=" + std::to_string(m);
      }
    }
    trace.radii.push_back(m);
    trace.origin_odometer.push_back(value);
    trace.work.push_back(work);
    trace.residuals.push_back(residual);
    previous = std::move(odometer);
    previous_box = box;
  }
  return trace;
}

std::string to_string(Growth growth) {
  switch (growth) {
    case Growth::Plateau: return "plateau";
    case Growth::Growth: return "growth";
    case Growth::Inconclusive: return "inconclusive";
  }
  return "unknown";
}

Growth classify_growth(std::span<const double> trace, double* ratio) {
  if (trace.size() < 2) {
    if (ratio) *ratio = std::numeric_limits<double>::quiet_NaN();
    return Growth::Inconclusive;
  }
  const double last = trace[trace.size() - 1];
  const double before = trace[trace.size() - 2];
  double r;
  if (before == 0.0) {
    r = last == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  } else {
    r = last / before;
  }
  if (ratio) *ratio = r;
  if (r < 1.05) return Growth::Plateau;
  if (r > 1.5) return Growth::Growth;
  return Growth::Inconclusive;
}

DichotomyReport dichotomy_experiment(int dim, const HeavyTailLaw& law, double mean, std::span<const int> radii,
                                     long reps, std::uint64_t seed, double tol) {
  if (reps < 1) throw std::invalid_argument("dichotomy_experiment: reps must be positive");
  DichotomyReport report;
  report.traces.resize(static_cast<std::size_t>(reps));
  parallel_for(reps, [&](long r) {
    report.traces[static_cast<std::size_t>(r)] =
        nested_stabilize(dim, law, mean, radii, tol, seed, static_cast<std::uint64_t>(r));
  });
  long plateau = 0;
  long growth = 0;
  for (const auto& trace : report.traces) {
    double ratio = 0.0;
    const Growth g = trace.complete && trace.radii.size() == radii.size()
                         ? classify_growth(trace.origin_odometer, &ratio)
                         : Growth::Inconclusive;
    report.classes.push_back(g);
    report.ratios.push_back(ratio);
    plateau += g == Growth::Plateau;
    growth += g == Growth::Growth;
  }
  const double n = static_cast<double>(reps);
  report.plateau_fraction = plateau / n;
  report.growth_fraction = growth / n;
  report.inconclusive_fraction = (n - plateau - growth) / n;
  return report;
}

}  // namespace sandpile
