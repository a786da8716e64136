// sandpile: command-line front end for every probe.
//
//   sandpile <command> [flags]
//   sandpile run <command> [flags]
//   sandpile --config run.toml [flags]
//
// Flags given on the command line override values from --config.

#include <cstdio>
#include <functional>
#include <iostream>

#include "CLI11.hpp"

#include "sandpile/experiment.hpp"

namespace {

using sandpile::ExperimentConfig;

const std::vector<std::string> kCommands = {"sample", "cfprobe", "green",     "nu",       "stabilize", "nested",
                                            "dichotomy", "veseries", "tailbound", "scaling", "selftest"};
const std::vector<std::string> kScaling = {"sweep", "mccf", "couple", "ksup", "fourier", "limit", "stability"};

struct Overrides {
  ExperimentConfig values;
  std::string law_kind;
  std::uint64_t seed = 0;
  bool torus = false;
  bool box = false;
  std::string config_path;
  std::vector<std::pair<CLI::Option*, std::function<void(ExperimentConfig&)>>> setters;
};

template <typename T>
struct is_vector : std::false_type {};
template <typename T>
struct is_vector<std::vector<T>> : std::true_type {};

template <typename T>
void bind_option(CLI::App* app, Overrides& o, const std::string& name, T& slot, const std::string& help,
          std::function<void(ExperimentConfig&)> apply) {
  CLI::Option* opt = app->add_option(name, slot, help);
  if constexpr (is_vector<T>::value) opt->delimiter(',');
  o.setters.emplace_back(opt, std::move(apply));
}

void add_flags(CLI::App* app, Overrides& o) {
  auto& v = o.values;
  app->add_option("--config", o.config_path, "TOML or JSON configuration file");
  bind_option(app, o, "--seed", o.seed, "master seed", [&o](ExperimentConfig& c) { c.seed = o.seed; });
  bind_option(app, o, "--out", v.out, "output directory", [&v](ExperimentConfig& c) { c.out = v.out; });
  bind_option(app, o, "--format", v.format, "csv or json", [&v](ExperimentConfig& c) { c.format = v.format; });
  bind_option(app, o, "--d", v.d, "lattice dimension", [&v](ExperimentConfig& c) { c.d = v.d; });
  bind_option(app, o, "--n", v.n, "torus side", [&v](ExperimentConfig& c) { c.n = v.n; });
  bind_option(app, o, "--radii", v.radii, "box radii, comma separated", [&v](ExperimentConfig& c) { c.radii = v.radii; });
  bind_option(app, o, "--radius,-m", v.radius, "box radius", [&v](ExperimentConfig& c) { c.radius = v.radius; });
  bind_option(app, o, "--domain", v.domain, "torus or box", [&v](ExperimentConfig& c) { c.domain = v.domain; });
  o.setters.emplace_back(app->add_flag("--torus", o.torus, "shorthand for --domain torus"),
                         [](ExperimentConfig& c) { c.domain = "torus"; });
  o.setters.emplace_back(app->add_flag("--box", o.box, "shorthand for --domain box"),
                         [](ExperimentConfig& c) { c.domain = "box"; });
  bind_option(app, o, "--law", o.law_kind, "point, gaussian, sas or pareto", [&o](ExperimentConfig& c) {
    try {
      c.law.kind = sandpile::parse_law_kind(o.law_kind);
    } catch (const std::invalid_argument& e) {
      throw sandpile::ConfigError("law.kind", e.what());
    }
  });
  bind_option(app, o, "--alpha", v.alpha, "stability index (law and kernel)", [&v](ExperimentConfig& c) {
    c.alpha = v.alpha;
    c.law.alpha = v.alpha;
  });
  bind_option(app, o, "--scale", v.law.scale, "law scale", [&v](ExperimentConfig& c) { c.law.scale = v.law.scale; });
  bind_option(app, o, "--shift", v.law.shift, "law shift", [&v](ExperimentConfig& c) { c.law.shift = v.law.shift; });
  bind_option(app, o, "--mean", v.mean, "mean mass", [&v](ExperimentConfig& c) { c.mean = v.mean; });
  o.setters.emplace_back(app->add_flag("--conserve", v.conserve, "recentre noise so total mass is |V|"),
                         [&v](ExperimentConfig& c) { c.conserve = v.conserve; });
  bind_option(app, o, "--tol", v.tol, "stopping tolerance", [&v](ExperimentConfig& c) { c.tol = v.tol; });
  bind_option(app, o, "--max-rounds", v.max_rounds, "toppling round cap",
       [&v](ExperimentConfig& c) { c.max_rounds = v.max_rounds; });
  bind_option(app, o, "--reps,-M", v.reps, "replicas", [&v](ExperimentConfig& c) { c.reps = v.reps; });
  bind_option(app, o, "--count", v.count, "number of samples", [&v](ExperimentConfig& c) { c.count = v.count; });
  bind_option(app, o, "--walks", v.walks, "random walks", [&v](ExperimentConfig& c) { c.walks = v.walks; });
  bind_option(app, o, "--schedule", v.schedule, "synchronous or checkerboard",
       [&v](ExperimentConfig& c) { c.schedule = v.schedule; });
  bind_option(app, o, "--method", v.method, "obstacle or toppling", [&v](ExperimentConfig& c) { c.method = v.method; });
  bind_option(app, o, "--source", v.source, "source site, comma separated", [&v](ExperimentConfig& c) { c.source = v.source; });
  bind_option(app, o, "--modes", v.modes, "test function, e.g. \"1:0.5\"", [&v](ExperimentConfig& c) { c.modes = v.modes; });
  bind_option(app, o, "--ns", v.ns, "torus sides", [&v](ExperimentConfig& c) { c.ns = v.ns; });
  bind_option(app, o, "--thetas", v.thetas, "CF arguments", [&v](ExperimentConfig& c) { c.thetas = v.thetas; });
  bind_option(app, o, "--ks", v.ks, "summand counts", [&v](ExperimentConfig& c) { c.ks = v.ks; });
  bind_option(app, o, "--truncations", v.truncations, "series truncations",
       [&v](ExperimentConfig& c) { c.truncations = v.truncations; });
  bind_option(app, o, "--margins", v.margins, "margins M", [&v](ExperimentConfig& c) { c.margins = v.margins; });
  bind_option(app, o, "--eps", v.eps, "coupling thresholds", [&v](ExperimentConfig& c) { c.eps = v.eps; });
  bind_option(app, o, "--delta", v.delta, "tail exponent delta", [&v](ExperimentConfig& c) { c.delta = v.delta; });
  bind_option(app, o, "--beta", v.beta, "Green series exponent", [&v](ExperimentConfig& c) { c.beta = v.beta; });
  bind_option(app, o, "--coefficients", v.coefficients, "power:p or green:d",
       [&v](ExperimentConfig& c) { c.coefficients = v.coefficients; });
  bind_option(app, o, "--length", v.length, "coefficient count", [&v](ExperimentConfig& c) { c.length = v.length; });
  bind_option(app, o, "--quadrature", v.quadrature, "Gauss-Legendre points per axis",
       [&v](ExperimentConfig& c) { c.quadrature = v.quadrature; });
  bind_option(app, o, "--a", v.a, "stability check factor a", [&v](ExperimentConfig& c) { c.a = v.a; });
  bind_option(app, o, "--b", v.b, "stability check factor b", [&v](ExperimentConfig& c) { c.b = v.b; });
  bind_option(app, o, "--corrupt", v.corrupt, "selftest: force the named check to fail",
       [&v](ExperimentConfig& c) { c.corrupt = v.corrupt; });
}

void emit_stdout(const sandpile::ExperimentReport& report, const std::string& format) {
  if (report.field_dump) {
    std::cout.write(report.field_dump->data(), static_cast<std::streamsize>(report.field_dump->size()));
    return;
  }
  if (format == "json") {
    std::cout << report.to_json(true).dump(2) << '\n';
    return;
  }
  if (report.bare_values && !report.tables.empty()) {
    const std::string csv = report.tables.front().csv();
    std::cout << csv.substr(csv.find('\n') + 1);
    return;
  }
  for (const auto& table : report.tables) {
    if (report.tables.size() > 1) std::cout << "# " << table.name << '\n';
    std::cout << table.csv();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Divisible sandpile experiments"};
  app.require_subcommand(0, 1);

  // One flag set per command path; whichever path parses is used.
  std::vector<std::unique_ptr<Overrides>> sets;
  std::vector<std::tuple<CLI::App*, Overrides*, std::string, std::string>> paths;
  auto root = std::make_unique<Overrides>();
  add_flags(&app, *root);
  paths.emplace_back(&app, root.get(), "", "");
  sets.push_back(std::move(root));

  auto add_commands = [&](CLI::App* parent) {
    for (const auto& name : kCommands) {
      CLI::App* sub = parent->add_subcommand(name, name + " probe");
      if (name == "scaling") {
        sub->require_subcommand(1);
        for (const auto& s : kScaling) {
          CLI::App* leaf = sub->add_subcommand(s, "scaling " + s);
          auto flags = std::make_unique<Overrides>();
          add_flags(leaf, *flags);
          paths.emplace_back(leaf, flags.get(), name, s);
          sets.push_back(std::move(flags));
        }
        continue;
      }
      auto flags = std::make_unique<Overrides>();
      add_flags(sub, *flags);
      paths.emplace_back(sub, flags.get(), name, "");
      sets.push_back(std::move(flags));
    }
  };
  add_commands(&app);
  CLI::App* run = app.add_subcommand("run", "run a command (same as calling it directly)");
  run->require_subcommand(1);
  add_commands(run);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    ExperimentConfig config;
    std::string config_path;
    for (const auto& [path, flags, command, subcommand] : paths) {
      if (path != &app && !path->parsed()) continue;
      if (!flags->config_path.empty()) config_path = flags->config_path;
    }
    if (!config_path.empty()) config = sandpile::load_config(config_path);
    for (const auto& [path, flags, command, subcommand] : paths) {
      if (path != &app && !path->parsed()) continue;
      if (!command.empty()) {
        config.command = command;
        config.subcommand = subcommand;
      }
      for (const auto& [opt, apply] : flags->setters) {
        if (opt->count() > 0) apply(config);
      }
    }
    if (config.command.empty()) throw sandpile::ConfigError("command", "no command given (see --help)");

    const sandpile::ExperimentReport report = sandpile::run(config);
    if (config.out.empty()) {
      emit_stdout(report, config.format);
    } else {
      sandpile::write_report(report, config.out, config.format);
    }
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
    for (const auto& check : report.checks) {
      std::cerr << (check.passed ? "pass  " : "FAIL  ") << check.name << "  value=" << check.value
                << "  tolerance=" << check.tolerance << '\n';
    }
    if (const auto* failed = report.first_failure()) {
      std::cerr << "check failed: " << failed->name << '\n';
      return 1;
    }
    return 0;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
