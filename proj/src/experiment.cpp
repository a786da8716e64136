#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "sandpile/experiment.hpp"
#include "sandpile/green.hpp"
#include "sandpile/probes.hpp"
#include "sandpile/sandpile.hpp"
#include "sandpile/scaling.hpp"

namespace sandpile {

using nlohmann::ordered_json;

namespace {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.17g", x);
  return buffer;
}

std::string format_cell(const Cell& cell) {
  if (const auto* i = std::get_if<long long>(&cell)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&cell)) return format_double(*d);
  const auto& s = std::get<std::string>(cell);
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

ordered_json cell_json(const Cell& cell) {
  if (const auto* i = std::get_if<long long>(&cell)) return *i;
  if (const auto* d = std::get_if<double>(&cell)) {
    return std::isfinite(*d) ? ordered_json(*d) : ordered_json(format_double(*d));
  }
  return std::get<std::string>(cell);
}

std::uint64_t seed_of(const ExperimentConfig& c) { return c.seed.value_or(1); }

void add_check(ExperimentReport& report, const std::string& name, double value, double tolerance,
               std::string detail = {}) {
  report.checks.push_back({name, value <= tolerance, value, tolerance, std::move(detail)});
}

template <typename T>
void require_nonempty(const std::vector<T>& values, const char* field) {
  if (values.empty()) throw ConfigError(field, "must not be empty");
}

Coord source_coord(const ExperimentConfig& c) {
  Coord x = Coord::Zero(c.d);
  if (c.source.empty()) return x;
  if (static_cast<int>(c.source.size()) != c.d) throw ConfigError("source", "needs d coordinates");
  for (int i = 0; i < c.d; ++i) x(i) = c.source[static_cast<std::size_t>(i)];
  return x;
}

TorusGrid torus_of(const ExperimentConfig& c) {
  if (c.n < 2) throw ConfigError("n", "a torus side n >= 2 is required");
  return TorusGrid(c.d, c.n);
}

TestFunction test_function_of(const ExperimentConfig& c) {
  try {
    if (c.modes.empty()) {
      TestFunction f(c.d);
      Coord z = Coord::Zero(c.d);
      z(0) = 1;
      f.set_mode(z, 0.5);
      return f;
    }
    return TestFunction::parse(c.d, c.modes);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("modes", e.what());
  }
}

// max over a != 0 of |lambda_a g^_x(a) + 2d n^{-d} chi_{-a}(x)|.
double green_identity_defect(const TorusGrid& grid, Index source) {
  const ComplexField spectrum = dft_forward(grid, torus_green_row(grid, source));
  const RealField lambda = laplacian_eigenvalues(grid);
  const Coord x = grid.coords(source);
  const double weight = grid.degree() / static_cast<double>(grid.size());
  double worst = 0.0;
  for (Index a = 1; a < grid.size(); ++a) {
    const std::complex<double> chi = std::conj(character(grid, grid.coords(a), x));
    worst = std::max(worst, std::abs(lambda(a) * spectrum(a) + weight * chi));
  }
  return worst;
}

double sup_distance(const RealField& a, const RealField& b) { return (a - b).abs().maxCoeff(); }

// ---------------------------------------------------------------------------

void run_sample(const ExperimentConfig& c, ExperimentReport& r) {
  RandomStream stream(seed_of(c), "sample");
  const RealField values = sample_field(c.law, stream, c.count);
  Table t{"samples", {"value"}, {}};
  for (Index i = 0; i < values.size(); ++i) t.add({values(i)});
  r.tables.push_back(std::move(t));
  r.bare_values = true;
  r.summary["count"] = c.count;
  r.summary["law"] = c.law.describe();
}

void run_cfprobe(const ExperimentConfig& c, ExperimentReport& r) {
  const bool closed_form = c.law.kind != LawKind::Pareto;
  if (c.ks.empty()) {
    RandomStream stream(seed_of(c), "cfprobe");
    const RealField values = sample_field(c.law, stream, c.count);
    const auto cf = empirical_cf(std::span<const double>(values.data(), static_cast<std::size_t>(values.size())),
                                 c.thetas);
    Table t{"cf", {"theta", "re", "im", "stderr"}, {}};
    if (closed_form) t.columns.push_back("exact");
    for (const auto& e : cf) {
      std::vector<Cell> row{e.theta, e.value.real(), e.value.imag(), e.stderr_};
      if (closed_form) row.push_back(characteristic_function(c.law, e.theta).real());
      t.add(std::move(row));
    }
    r.tables.push_back(std::move(t));
    return;
  }
  const auto probe = normalized_sum_probe(c.law, c.ks, c.reps, c.thetas, seed_of(c));
  Table t{"cf", {"k", "theta", "re", "im", "stderr"}, {}};
  Table fit{"fit", {"k", "fitted_scale"}, {}};
  for (const auto& row : probe.rows) {
    for (const auto& e : row.cf) t.add({static_cast<long long>(row.k), e.theta, e.value.real(), e.value.imag(), e.stderr_});
    fit.add({static_cast<long long>(row.k), row.fitted_scale});
  }
  r.tables.push_back(std::move(t));
  r.tables.push_back(std::move(fit));
  if (!(c.law.kind == LawKind::Pareto && c.law.alpha == 2.0)) r.summary["attraction_scale"] = attraction_scale(c.law);
  r.warnings.insert(r.warnings.end(), probe.warnings.begin(), probe.warnings.end());
}

void run_green(const ExperimentConfig& c, ExperimentReport& r) {
  std::ostringstream dump;
  Table t{"green", {"site", "value"}, {}};
  if (c.domain == "torus") {
    const TorusGrid grid = torus_of(c);
    const Index source = grid.index(source_coord(c));
    const RealField row = torus_green_row(grid, source);
    for (Index i = 0; i < row.size(); ++i) t.add({static_cast<long long>(i), row(i)});
    write_field(dump, grid.dim(), grid.side(), row, ordered_json{{"kind", "torus-green"}, {"source", static_cast<long long>(source)}}.dump());
    add_check(r, "green-identity", green_identity_defect(grid, source), 1e-12);
  } else {
    const BoxDomain box(c.d, c.radius);
    Index source = 0;
    try {
      source = box.index(source_coord(c));
    } catch (const std::out_of_range&) {
      throw ConfigError("source", "outside the box");
    }
    const KilledGreen g = killed_green(box, source);
    for (Index i = 0; i < g.values.size(); ++i) t.add({static_cast<long long>(i), g.values(i)});
    write_field(dump, box.dim(), box.side(), g.values,
                ordered_json{{"kind", "killed-green"}, {"radius", c.radius}, {"source", static_cast<long long>(source)}}.dump());
    r.summary["cg_iterations"] = g.solve.iterations;
    add_check(r, "killed-green-residual", g.solve.residual, 1e-9);
  }
  r.tables.push_back(std::move(t));
  r.field_dump = dump.str();
}

void run_nu(const ExperimentConfig& c, ExperimentReport& r) {
  require_nonempty(c.radii, "radii");
  Table t{"nu", {"m", "nu"}, {}};
  std::vector<double> values;
  for (int m : c.radii) {
    values.push_back(nu_alpha(c.d, m, c.alpha));
    t.add({static_cast<long long>(m), values.back()});
  }
  r.tables.push_back(std::move(t));
  double drop = 0.0;
  for (std::size_t i = 1; i < values.size(); ++i) drop = std::max(drop, values[i - 1] - values[i]);
  add_check(r, "nu-monotone", drop, 0.0, "largest decrease between consecutive radii");
  if (values.size() >= 3) {
    const std::size_t k = values.size() - 1;
    r.summary["last_increment_ratio"] = (values[k] - values[k - 1]) / (values[k - 1] - values[k - 2]);
  }
}

void run_stabilize(const ExperimentConfig& c, ExperimentReport& r) {
  Domain domain = c.domain == "torus" ? Domain(torus_of(c)) : Domain(BoxDomain(c.d, c.radius));
  const MassField initial = init_configuration(domain, c.law, c.mean, c.conserve, seed_of(c));
  const ToppleResult result = topple_to_stability(initial, c.tol, c.max_rounds, parse_schedule(c.schedule));
  Table t{"odometer", {"site", "u", "final_mass"}, {}};
  for (Index i = 0; i < result.odometer.values.size(); ++i) {
    t.add({static_cast<long long>(i), result.odometer.values(i), result.final.mass(i)});
  }
  r.tables.push_back(std::move(t));
  r.summary["domain"] = describe(domain);
  r.summary["classification"] = result.stabilized ? "stabilized" : "not stabilized";
  r.summary["rounds"] = result.rounds;
  r.summary["max_excess"] = result.max_excess;
  r.summary["identity_residual"] = result.identity_residual;
  add_check(r, "stabilized", result.stabilized ? 0.0 : 1.0, 0.0, "max excess below tol within max_rounds");
  if (const auto* grid = std::get_if<TorusGrid>(&domain)) {
    const double total = initial.mass.sum();
    const double n = static_cast<double>(grid->size());
    if (result.stabilized && std::abs(total - n) <= 1e-9 * n) {
      const OdometerField exact = odometer_exact(*grid, initial.mass);
      const RealField& u = result.odometer.values;
      const double error = sup_distance(u - u.minCoeff(), exact.values);
      r.summary["exact_odometer_error"] = error;
      add_check(r, "odometer-exact", error, std::max(1e4, 10.0 * n) * c.tol, "sup |(u - min u) - u_exact|");
    }
  }
}

void run_nested(const ExperimentConfig& c, ExperimentReport& r) {
  require_nonempty(c.radii, "radii");
  const NestedTrace trace = nested_stabilize(c.d, c.law, c.mean, c.radii, c.tol, seed_of(c), 0,
                                             parse_nested_method(c.method));
  Table t{"trace", {"m", "u_origin", "work", "residual"}, {}};
  for (std::size_t i = 0; i < trace.origin_odometer.size(); ++i) {
    t.add({static_cast<long long>(trace.radii[i]), trace.origin_odometer[i], static_cast<long long>(trace.work[i]),
           trace.residuals[i]});
  }
  r.tables.push_back(std::move(t));
  double ratio = 0.0;
  r.summary["classification"] = to_string(classify_growth(trace.origin_odometer, &ratio));
  r.summary["ratio"] = ratio;
  r.summary["monotone"] = trace.monotone;
  r.summary["residuals"] = trace.residuals;
  if (!trace.flag.empty()) r.warnings.push_back(trace.flag);
  add_check(r, "nested-complete", trace.complete ? 0.0 : 1.0, 0.0, "every radius solved");
}

void run_dichotomy(const ExperimentConfig& c, ExperimentReport& r) {
  require_nonempty(c.radii, "radii");
  const DichotomyReport d = dichotomy_experiment(c.d, c.law, c.mean, c.radii, c.reps, seed_of(c), c.tol);
  Table traces{"traces", {"replica", "m", "u_origin"}, {}};
  Table classes{"classes", {"replica", "ratio", "class"}, {}};
  long incomplete = 0;
  for (std::size_t k = 0; k < d.traces.size(); ++k) {
    const auto& trace = d.traces[k];
    for (std::size_t i = 0; i < trace.origin_odometer.size(); ++i) {
      traces.add({static_cast<long long>(k), static_cast<long long>(trace.radii[i]), trace.origin_odometer[i]});
    }
    classes.add({static_cast<long long>(k), d.ratios[k], to_string(d.classes[k])});
    if (!trace.complete) ++incomplete;
  }
  r.tables.push_back(std::move(traces));
  r.tables.push_back(std::move(classes));
  r.summary["plateau_fraction"] = d.plateau_fraction;
  r.summary["growth_fraction"] = d.growth_fraction;
  r.summary["inconclusive_fraction"] = d.inconclusive_fraction;
  std::string verdict = "mixed";
  if (d.plateau_fraction > 0.5) verdict = "plateau";
  if (d.growth_fraction > 0.5) verdict = "growth";
  r.summary["classification"] = verdict;
  add_check(r, "dichotomy-complete", static_cast<double>(incomplete), 0.0, "replicas with an unsolved radius");
}

void run_veseries(const ExperimentConfig& c, ExperimentReport& r) {
  require_nonempty(c.truncations, "truncations");
  const VeSeriesProbe probe = ve_series_probe(c.d, c.law, c.truncations, c.reps, c.margins, seed_of(c));
  Table ks{"ks", {"truncation", "ks"}, {}};
  Table quantiles{"quantiles", {"truncation", "p", "q"}, {}};
  Table tail{"left_tail", {"truncation", "M", "probability"}, {}};
  for (const auto& row : probe.rows) {
    const auto n = static_cast<long long>(row.truncation);
    ks.add({n, row.ks});
    for (std::size_t i = 0; i < probe.probabilities.size(); ++i) quantiles.add({n, probe.probabilities[i], row.quantiles[i]});
    for (std::size_t i = 0; i < probe.margins.size(); ++i) tail.add({n, probe.margins[i], row.left_tail[i]});
  }
  r.tables.push_back(std::move(ks));
  r.tables.push_back(std::move(quantiles));
  r.tables.push_back(std::move(tail));
}

void run_tailbound(const ExperimentConfig& c, ExperimentReport& r) {
  require_nonempty(c.margins, "margins");
  std::vector<double> coefficients;
  try {
    coefficients = coefficient_sequence(c.coefficients, c.length);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("coefficients", e.what());
  }
  const TailBoundReport report = tail_bound_check(coefficients, c.law, c.delta, c.margins, c.reps, seed_of(c));
  Table t{"tailbound", {"M", "n1", "probability", "bound"}, {}};
  for (const auto& row : report.rows) t.add({row.margin, static_cast<long long>(row.n1), row.probability, row.bound});
  r.tables.push_back(std::move(t));
  r.summary["delta"] = report.delta;
  r.summary["delta_sum"] = report.delta_sum;
  r.summary["x1"] = report.x1;
  r.summary["x2"] = report.x2;
  r.summary["exponent"] = report.exponent;
}

void run_scaling(const ExperimentConfig& c, ExperimentReport& r) {
  const TestFunction f = test_function_of(c);
  r.summary["test_function"] = f.to_string();
  const std::string& sub = c.subcommand;
  if (sub == "limit") {
    const LimitValue v = limit_functional(f, c.alpha, c.quadrature);
    r.tables.push_back({"limit", {"alpha", "value", "relative_error"}, {{c.alpha, v.value, v.relative_error}}});
    r.summary["limit"] = v.value;
    return;
  }
  if (sub == "stability") {
    const std::vector<TestFunction> fs{f};
    Table t{"stability", {"lhs", "rhs", "pass"}, {}};
    long failures = 0;
    for (const auto& row : stability_property_check(fs, c.alpha, c.a, c.b)) {
      t.add({row.lhs, row.rhs, static_cast<long long>(row.pass)});
      if (!row.pass) ++failures;
    }
    r.tables.push_back(std::move(t));
    add_check(r, "stability", static_cast<double>(failures), 0.0, "functions violating the stability identity");
    return;
  }
  require_nonempty(c.ns, "ns");
  if (sub == "sweep") {
    const Sweep sweep = convergence_sweep(f, c.alpha, c.ns);
    Table t{"sweep", {"n", "knsum", "limit", "gap"}, {}};
    for (const auto& row : sweep.rows) t.add({static_cast<long long>(row.n), row.kernel_sum, row.limit, row.gap});
    r.tables.push_back(std::move(t));
    r.summary["rate"] = sweep.rate;
  } else if (sub == "ksup") {
    const auto rows = kn_sup_check(f, c.alpha, c.ns);
    Table t{"ksup", {"n", "normalized_sup"}, {}};
    for (const auto& row : rows) t.add({static_cast<long long>(row.n), row.normalized_sup});
    r.tables.push_back(std::move(t));
    r.summary["band_ratio"] = band_ratio(rows);
  } else if (sub == "fourier") {
    Table t{"fourier", {"n", "max_discrepancy", "normalized"}, {}};
    for (const auto& row : fourier_discrepancy(f, c.ns)) {
      t.add({static_cast<long long>(row.n), row.max_discrepancy, row.normalized});
    }
    r.tables.push_back(std::move(t));
  } else if (sub == "mccf") {
    const bool stable = c.law.kind == LawKind::Stable;
    const bool attracted = c.law.symmetric() && (c.law.kind == LawKind::Stable || c.law.kind == LawKind::Pareto) &&
                           c.law.alpha == c.alpha && c.alpha < 2.0;
    Table t{"mccf", {"n", "theta", "re", "im", "stderr", "exact", "difference"}, {}};
    double worst = 0.0;
    double bound = 0.0;
    for (int n : c.ns) {
      const TorusGrid grid(c.d, n);
      const ScalingKernel kernel = kernel_kn(grid, f, c.alpha);
      for (double theta : c.thetas) {
        const McCf mc = mc_cf(grid, kernel, c.law, c.reps, seed_of(c), theta);
        double exact = std::nan("");
        if (attracted) exact = exact_cf_finite_n(kernel, attraction_scale(c.law) * std::abs(theta));
        const double difference = std::abs(mc.value - std::complex<double>(exact, 0.0));
        t.add({static_cast<long long>(n), theta, mc.value.real(), mc.value.imag(), mc.stderr_, exact, difference});
        if (stable) {
          worst = std::max(worst, difference / mc.stderr_);
          bound = 5.0;
        }
      }
    }
    r.tables.push_back(std::move(t));
    if (stable) add_check(r, "mc-vs-exact", worst, bound, "largest |MC - exact| in units of 1/sqrt(M)");
  } else if (sub == "couple") {
    if (!(c.law.kind == LawKind::Pareto && c.law.alpha < 2.0)) {
      throw ConfigError("law", "couple needs a Pareto law with alpha < 2");
    }
    const HeavyTailLaw target = HeavyTailLaw::stable(c.law.alpha, attraction_scale(c.law));
    const CouplingProbe probe = coupling_probe(c.d, c.ns, f, c.alpha, c.law, target, c.reps, c.eps, seed_of(c));
    Table t{"couple", {"n", "eps", "exceedance"}, {}};
    Table l1{"l1", {"n", "l1_distance", "clipped"}, {}};
    for (const auto& row : probe.rows) {
      for (std::size_t i = 0; i < probe.eps.size(); ++i) t.add({static_cast<long long>(row.n), probe.eps[i], row.exceedance[i]});
      l1.add({static_cast<long long>(row.n), row.l1_distance, static_cast<long long>(row.clipped)});
    }
    r.tables.push_back(std::move(t));
    r.tables.push_back(std::move(l1));
    r.warnings.insert(r.warnings.end(), probe.warnings.begin(), probe.warnings.end());
  }
}

// ---------------------------------------------------------------------------

void selftest_checks(const ExperimentConfig& c, ExperimentReport& r) {
  const std::uint64_t seed = seed_of(c);
  Table table{"selftest", {"check", "value", "tolerance", "passed"}, {}};

  double identity = 0.0;
  for (int d : {1, 2}) {
    for (int n : {4, 8, 16}) {
      const TorusGrid grid(d, n);
      for (Index x = 0; x < grid.size(); ++x) identity = std::max(identity, green_identity_defect(grid, x));
    }
  }
  add_check(r, "green-identity", identity, 1e-12, "d in {1,2}, n in {4,8,16}, every source");

  const TorusGrid grid(2, 16);
  double odometer = 0.0;
  double schedules = 0.0;
  for (std::uint64_t replica = 0; replica < 2; ++replica) {
    const MassField s = init_configuration(grid, HeavyTailLaw::gaussian(1.0), 1.0, true, seed, replica);
    const ToppleResult sync = topple_to_stability(s, 1e-10, 10'000'000, Schedule::Synchronous);
    const ToppleResult board = topple_to_stability(s, 1e-10, 10'000'000, Schedule::Checkerboard);
    const RealField& u = sync.odometer.values;
    odometer = std::max(odometer, sup_distance(u - u.minCoeff(), odometer_exact(grid, s.mass).values));
    schedules = std::max(schedules, sup_distance(u, board.odometer.values));
  }
  add_check(r, "odometer-cross-check", odometer, 1e-6, "d=2, n=16 conserved Gaussian");
  add_check(r, "schedule-independence", schedules, 1e-8, "synchronous vs checkerboard");

  TestFunction f(1);
  f.set_mode(Coord::Constant(1, 1), 0.5);
  const ScalingKernel k64 = kernel_kn(TorusGrid(1, 64), f, 2.0);
  add_check(r, "parseval", std::abs(k64.power_sum - 0.5) / 0.5, 0.02, "sum |k_64|^2 against 1/2");
  add_check(r, "limit-alpha2", std::abs(limit_functional(f, 2.0).value - 0.5), 1e-8);

  const long replicas = 100'000;
  const TorusGrid line(1, 32);
  const ScalingKernel k32 = kernel_kn(line, f, 1.5);
  const McCf mc = mc_cf(line, k32, HeavyTailLaw::stable(1.5), replicas, seed);
  const double exact = exact_cf_finite_n(k32, 1.0);
  add_check(r, "mc-vs-exact-cf", std::abs(mc.value - exact) * std::sqrt(static_cast<double>(replicas)), 3.0,
            "alpha=1.5, d=1, n=32, in units of 1/sqrt(M)");

  double quantiles = 0.0;
  const std::vector<HeavyTailLaw> laws{HeavyTailLaw::stable(1.5), HeavyTailLaw::stable(1.8, 2.0),
                                       HeavyTailLaw::gaussian(1.0), HeavyTailLaw::stable(1.0)};
  for (const auto& law : laws) {
    for (double p : {1e-3, 0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 0.999}) {
      quantiles = std::max(quantiles, std::abs(cdf(law, quantile(law, p)) - p));
    }
  }
  add_check(r, "quantile-consistency", quantiles, 1e-9, "max |F(F^{-1}(p)) - p|");

  ExperimentConfig sample;
  sample.command = "scaling";
  sample.subcommand = "sweep";
  sample.seed = 42;
  sample.law = HeavyTailLaw::pareto(1.5, 0.7);
  sample.ns = {8, 16};
  sample.modes = "1:0.5,0.25";
  sample.tol = 0.1;
  const bool toml = config_from_json(parse_toml(emit_toml(sample))) == sample;
  const bool json = config_from_json(nlohmann::json::parse(to_json(sample).dump())) == sample;
  add_check(r, "config-round-trip", toml && json ? 0.0 : 1.0, 0.0);

  const KilledGreen single = killed_green(BoxDomain(2, 0), 0);
  add_check(r, "killed-green-single-site", std::abs(single.values(0) - 1.0), 1e-12);

  if (!c.corrupt.empty()) {
    bool found = false;
    for (auto& check : r.checks) {
      if (check.name == c.corrupt) {
        check.tolerance = -1.0;
        check.passed = check.value <= check.tolerance;
        found = true;
      }
    }
    if (!found) throw ConfigError("corrupt", "no check named '" + c.corrupt + "'");
  }
  for (const auto& check : r.checks) {
    table.add({check.name, check.value, check.tolerance, static_cast<long long>(check.passed)});
  }
  r.tables.push_back(std::move(table));
}

ordered_json manifest_of(const ExperimentConfig& c) {
  ExperimentConfig resolved = c;
  resolved.seed = seed_of(c);
  ordered_json m;
  m["artifact"] = "sandpile";
  m["version"] = std::string(artifact_version());
  m["config"] = to_json(resolved);
  return m;
}

ExperimentReport execute(const ExperimentConfig& c, void (*body)(const ExperimentConfig&, ExperimentReport&)) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentReport report;
  report.manifest = manifest_of(c);
  body(c, report);
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace

void Table::add(std::vector<Cell> row) {
  if (row.size() != columns.size()) throw std::logic_error("table " + name + ": row width mismatch");
  rows.push_back(std::move(row));
}

std::string Table::csv() const {
  std::string out;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) out += ',';
    out += columns[i];
  }
  out += '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_cell(row[i]);
    }
    out += '\n';
  }
  return out;
}

bool ExperimentReport::passed() const { return first_failure() == nullptr; }

const Check* ExperimentReport::first_failure() const {
  for (const auto& check : checks) {
    if (!check.passed) return &check;
  }
  return nullptr;
}

const Table& ExperimentReport::table(std::string_view name) const {
  for (const auto& t : tables) {
    if (t.name == name) return t;
  }
  throw std::out_of_range("no table named " + std::string(name));
}

ordered_json ExperimentReport::to_json(bool include_tables) const {
  ordered_json j;
  j["manifest"] = manifest;
  j["summary"] = summary;
  ordered_json checks_json = ordered_json::array();
  for (const auto& c : checks) {
    checks_json.push_back({{"name", c.name}, {"passed", c.passed}, {"value", c.value}, {"tolerance", c.tolerance},
                           {"detail", c.detail}});
  }
  j["checks"] = checks_json;
  j["passed"] = passed();
  j["warnings"] = warnings;
  if (include_tables) {
    ordered_json tables_json = ordered_json::object();
    for (const auto& t : tables) {
      ordered_json rows = ordered_json::array();
      for (const auto& row : t.rows) {
        ordered_json r = ordered_json::array();
        for (const auto& cell : row) r.push_back(cell_json(cell));
        rows.push_back(r);
      }
      tables_json[t.name] = {{"columns", t.columns}, {"rows", rows}};
    }
    j["tables"] = tables_json;
  }
  return j;
}

ExperimentReport run(const ExperimentConfig& config) {
  validate(config);
  const std::string& cmd = config.command;
  if (cmd == "selftest") return selftest(config);
  if (cmd == "sample") return execute(config, run_sample);
  if (cmd == "cfprobe") return execute(config, run_cfprobe);
  if (cmd == "green") return execute(config, run_green);
  if (cmd == "nu") return execute(config, run_nu);
  if (cmd == "stabilize") return execute(config, run_stabilize);
  if (cmd == "nested") return execute(config, run_nested);
  if (cmd == "dichotomy") return execute(config, run_dichotomy);
  if (cmd == "veseries") return execute(config, run_veseries);
  if (cmd == "tailbound") return execute(config, run_tailbound);
  return execute(config, run_scaling);
}

ExperimentReport selftest(const ExperimentConfig& config) {
  ExperimentConfig c = config;
  c.command = "selftest";
  return execute(c, selftest_checks);
}

void atomic_write(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path temp = target;
  temp += ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + temp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + temp.string());
  }
  fs::rename(temp, target);
}

void write_report(const ExperimentReport& report, const std::string& dir, const std::string& format) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path root(dir);
  const bool json = format == "json";
  if (!json) {
    for (const auto& t : report.tables) atomic_write((root / (t.name + ".csv")).string(), t.csv());
  }
  atomic_write((root / "report.json").string(), report.to_json(json).dump(2) + "\n");
  atomic_write((root / "timing.json").string(), ordered_json{{"wall_time", report.wall_time}}.dump() + "\n");
  if (report.field_dump) atomic_write((root / "field.bin").string(), *report.field_dump);
}

}  // namespace sandpile
