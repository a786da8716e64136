#ifndef SANDPILE_EXPERIMENT_HPP
#define SANDPILE_EXPERIMENT_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

#include "sandpile/stable_laws.hpp"

namespace sandpile {

std::string_view artifact_version();

/// Invalid configuration; `field` is the dotted path of the offending entry.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Fully resolved description of one run. Unused fields keep their defaults
/// and are still echoed in the manifest.
struct ExperimentConfig {
  std::string command;
  std::string subcommand;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "csv";

  int d = 1;
  int n = 0;
  std::vector<int> radii;
  std::string domain = "torus";
  HeavyTailLaw law = HeavyTailLaw::point();
  double alpha = 1.5;
  double mean = 1.0;
  bool conserve = false;
  double tol = 1e-10;
  long max_rounds = 10'000'000;
  long reps = 1;
  long count = 1000;
  long walks = 100'000;
  std::string schedule = "synchronous";
  std::string method = "obstacle";
  std::vector<int> source;
  std::string modes;
  std::vector<int> ns;
  std::vector<double> thetas{1.0};
  std::vector<long> ks;
  std::vector<long> truncations;
  std::vector<double> margins;
  std::vector<double> eps{0.05, 0.1, 0.2};
  double delta = 1.2;
  double beta = 1.0;
  int radius = 10;
  std::string coefficients = "power:2";
  long length = 10'000;
  int quadrature = 64;
  double a = 1.0;
  double b = 1.0;
  std::string corrupt;

  bool operator==(const ExperimentConfig&) const;
};

nlohmann::ordered_json to_json(const ExperimentConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& json);
std::string emit_toml(const ExperimentConfig& config);
/// Reads the TOML subset written by emit_toml: scalars, flat arrays and a
/// [law] table.
nlohmann::json parse_toml(std::string_view text);
/// Chooses JSON or TOML by file extension.
ExperimentConfig load_config(const std::string& path);

/// Range and budget checks; throws ConfigError.
void validate(const ExperimentConfig& config);

using Cell = std::variant<long long, double, std::string>;

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row);
  /// Header line plus one line per row; doubles as %.17g, '\n' line ends.
  std::string csv() const;
};

struct Check {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct ExperimentReport {
  nlohmann::ordered_json manifest;
  std::vector<Table> tables;
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
  std::vector<Check> checks;
  std::vector<std::string> warnings;
  double wall_time = 0.0;
  /// Binary site-field dump (green command).
  std::optional<std::string> field_dump;
  /// Print the first table as bare values, one per line (sample command).
  bool bare_values = false;

  bool passed() const;
  const Check* first_failure() const;
  const Table& table(std::string_view name) const;
  nlohmann::ordered_json to_json(bool include_tables) const;
};

ExperimentReport run(const ExperimentConfig& config);
ExperimentReport selftest(const ExperimentConfig& config);

/// Writes content to path through a temporary file and rename.
void atomic_write(const std::string& path, const std::string& content);
/// Writes <dir>/<table>.csv for every table, <dir>/report.json and, when
/// present, <dir>/field.bin.
void write_report(const ExperimentReport& report, const std::string& dir, const std::string& format);

}  // namespace sandpile

#endif  // SANDPILE_EXPERIMENT_HPP
