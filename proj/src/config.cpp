#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sandpile/experiment.hpp"

#ifndef SANDPILE_VERSION
#define SANDPILE_VERSION "0.0.0"
#endif

namespace sandpile {

std::string_view artifact_version() { return SANDPILE_VERSION; }

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

const std::vector<std::string> kCommands = {"sample", "cfprobe", "green",     "nu",       "stabilize", "nested",
                                            "dichotomy", "veseries", "tailbound", "scaling", "selftest"};
const std::vector<std::string> kScalingSubcommands = {"sweep", "mccf", "couple", "ksup",
                                                      "fourier", "limit", "stability"};

bool contains(const std::vector<std::string>& list, const std::string& value) {
  return std::find(list.begin(), list.end(), value) != list.end();
}

template <typename T>
void read(const json& source, const std::string& key, T& target) {
  try {
    target = source.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(key, std::string("wrong type (") + e.what() + ")");
  }
}

std::string toml_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + '"';
}

std::string toml_value(const ordered_json& v) {
  char buffer[64];
  switch (v.type()) {
    case json::value_t::string: return toml_string(v.get<std::string>());
    case json::value_t::boolean: return v.get<bool>() ? "true" : "false";
    case json::value_t::number_integer: return std::to_string(v.get<long long>());
    case json::value_t::number_unsigned: return std::to_string(v.get<unsigned long long>());
    case json::value_t::number_float: {
      const double x = v.get<double>();
      if (std::isnan(x)) return "nan";
      if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
      std::snprintf(buffer, sizeof buffer, "%.17g", x);
      std::string s = buffer;
      if (s.find_first_of(".eE") == std::string::npos) s += ".0";
      return s;
    }
    case json::value_t::array: {
      std::string out = "[";
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += toml_value(v[i]);
      }
      return out + "]";
    }
    default: throw std::logic_error("value has no TOML form");
  }
}

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && quoted) {
      ++i;
      continue;
    }
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

json toml_scalar(const std::string& text, const std::string& key) {
  if (text.empty()) throw ConfigError(key, "missing value");
  if (text.front() == '"') {
    if (text.size() < 2 || text.back() != '"') throw ConfigError(key, "unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < text.size(); ++i) {
      if (text[i] == '\\' && i + 2 < text.size()) {
        ++i;
        out += text[i] == 'n' ? '\n' : text[i];
      } else {
        out += text[i];
      }
    }
    return out;
  }
  if (text == "true") return true;
  if (text == "false") return false;
  if (text == "nan") return std::nan("");
  if (text == "inf" || text == "+inf") return HUGE_VAL;
  if (text == "-inf") return -HUGE_VAL;
  const bool integral = text.find_first_not_of("+-0123456789_") == std::string::npos;
  std::string digits;
  for (char c : text) {
    if (c != '_') digits += c;
  }
  try {
    std::size_t used = 0;
    if (integral) {
      if (digits.front() == '-') {
        const long long v = std::stoll(digits, &used);
        if (used == digits.size()) return v;
      } else {
        const unsigned long long v = std::stoull(digits, &used);
        if (used == digits.size()) return v;
      }
    } else {
      const double v = std::stod(digits, &used);
      if (used == digits.size()) return v;
    }
  } catch (const std::exception&) {
  }
  throw ConfigError(key, "cannot parse value '" + text + "'");
}

json toml_value_parse(const std::string& text, const std::string& key) {
  if (!text.empty() && text.front() == '[') {
    if (text.back() != ']') throw ConfigError(key, "unterminated array");
    json array = json::array();
    std::string item;
    bool quoted = false;
    for (std::size_t i = 1; i + 1 < text.size(); ++i) {
      const char c = text[i];
      if (c == '"') quoted = !quoted;
      if (c == ',' && !quoted) {
        if (!trim(item).empty()) array.push_back(toml_scalar(trim(item), key));
        item.clear();
      } else {
        item += c;
      }
    }
    if (!trim(item).empty()) array.push_back(toml_scalar(trim(item), key));
    return array;
  }
  return toml_scalar(text, key);
}

}  // namespace

bool ExperimentConfig::operator==(const ExperimentConfig& other) const {
  return to_json(*this) == to_json(other);
}

ordered_json to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["command"] = c.command;
  j["subcommand"] = c.subcommand;
  j["seed"] = c.seed ? ordered_json(*c.seed) : ordered_json(nullptr);
  j["out"] = c.out;
  j["format"] = c.format;
  j["d"] = c.d;
  j["n"] = c.n;
  j["radii"] = c.radii;
  j["domain"] = c.domain;
  j["law"] = {{"kind", to_string(c.law.kind)}, {"alpha", c.law.alpha}, {"scale", c.law.scale}, {"shift", c.law.shift}};
  j["alpha"] = c.alpha;
  j["mean"] = c.mean;
  j["conserve"] = c.conserve;
  j["tol"] = c.tol;
  j["max_rounds"] = c.max_rounds;
  j["reps"] = c.reps;
  j["count"] = c.count;
  j["walks"] = c.walks;
  j["schedule"] = c.schedule;
  j["method"] = c.method;
  j["source"] = c.source;
  j["modes"] = c.modes;
  j["ns"] = c.ns;
  j["thetas"] = c.thetas;
  j["ks"] = c.ks;
  j["truncations"] = c.truncations;
  j["margins"] = c.margins;
  j["eps"] = c.eps;
  j["delta"] = c.delta;
  j["beta"] = c.beta;
  j["radius"] = c.radius;
  j["coefficients"] = c.coefficients;
  j["length"] = c.length;
  j["quadrature"] = c.quadrature;
  j["a"] = c.a;
  j["b"] = c.b;
  j["corrupt"] = c.corrupt;
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("(root)", "configuration must be an object");
  ExperimentConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "command") read(value, key, c.command);
    else if (key == "subcommand") read(value, key, c.subcommand);
    else if (key == "seed") {
      if (value.is_null()) c.seed.reset();
      else if (value.is_number_unsigned()) c.seed = value.get<std::uint64_t>();
      else if (value.is_number_integer() && value.get<long long>() >= 0) c.seed = value.get<std::uint64_t>();
      else throw ConfigError(key, "seed must be a nonnegative integer");
    }
    else if (key == "out") read(value, key, c.out);
    else if (key == "format") read(value, key, c.format);
    else if (key == "d") read(value, key, c.d);
    else if (key == "n") read(value, key, c.n);
    else if (key == "radii") read(value, key, c.radii);
    else if (key == "domain") read(value, key, c.domain);
    else if (key == "law") {
      if (!value.is_object()) throw ConfigError(key, "law must be a table");
      for (const auto& [lk, lv] : value.items()) {
        const std::string path = "law." + lk;
        if (lk == "kind") {
          std::string kind;
          read(lv, path, kind);
          try {
            c.law.kind = parse_law_kind(kind);
          } catch (const std::invalid_argument& e) {
            throw ConfigError(path, e.what());
          }
        } else if (lk == "alpha") read(lv, path, c.law.alpha);
        else if (lk == "scale") read(lv, path, c.law.scale);
        else if (lk == "shift") read(lv, path, c.law.shift);
        else throw ConfigError(path, "unknown field");
      }
    }
    else if (key == "alpha") read(value, key, c.alpha);
    else if (key == "mean") read(value, key, c.mean);
    else if (key == "conserve") read(value, key, c.conserve);
    else if (key == "tol") read(value, key, c.tol);
    else if (key == "max_rounds") read(value, key, c.max_rounds);
    else if (key == "reps") read(value, key, c.reps);
    else if (key == "count") read(value, key, c.count);
    else if (key == "walks") read(value, key, c.walks);
    else if (key == "schedule") read(value, key, c.schedule);
    else if (key == "method") read(value, key, c.method);
    else if (key == "source") read(value, key, c.source);
    else if (key == "modes") read(value, key, c.modes);
    else if (key == "ns") read(value, key, c.ns);
    else if (key == "thetas") read(value, key, c.thetas);
    else if (key == "ks") read(value, key, c.ks);
    else if (key == "truncations") read(value, key, c.truncations);
    else if (key == "margins") read(value, key, c.margins);
    else if (key == "eps") read(value, key, c.eps);
    else if (key == "delta") read(value, key, c.delta);
    else if (key == "beta") read(value, key, c.beta);
    else if (key == "radius") read(value, key, c.radius);
    else if (key == "coefficients") read(value, key, c.coefficients);
    else if (key == "length") read(value, key, c.length);
    else if (key == "quadrature") read(value, key, c.quadrature);
    else if (key == "a") read(value, key, c.a);
    else if (key == "b") read(value, key, c.b);
    else if (key == "corrupt") read(value, key, c.corrupt);
    else throw ConfigError(key, "unknown field");
  }
  return c;
}

std::string emit_toml(const ExperimentConfig& config) {
  const ordered_json j = to_json(config);
  std::string out;
  for (const auto& [key, value] : j.items()) {
    if (key == "law" || value.is_null()) continue;
    out += key + " = " + toml_value(value) + "\n";
  }
  out += "\n[law]\n";
  for (const auto& [key, value] : j["law"].items()) out += key + " = " + toml_value(value) + "\n";
  return out;
}

json parse_toml(std::string_view text) {
  json root = json::object();
  json* section = &root;
  std::string prefix;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_number = 0;
  while (std::getline(in, raw)) {
    ++line_number;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(line_number), "bad table header");
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (name.empty()) throw ConfigError("line " + std::to_string(line_number), "empty table name");
      root[name] = json::object();
      section = &root[name];
      prefix = name + ".";
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_number), "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    try {
      (*section)[key] = toml_value_parse(trim(line.substr(eq + 1)), prefix + key);
    } catch (const ConfigError& e) {
      throw ConfigError(e.field(), "line " + std::to_string(line_number) + ": " +
                                       std::string(e.what()).substr(e.field().size() + 2));
    }
  }
  return root;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const bool is_json = path.size() >= 5 && path.substr(path.size() - 5) == ".json";
  if (is_json) {
    json j;
    try {
      j = json::parse(buffer.str());
    } catch (const json::exception& e) {
      throw ConfigError("config", std::string("invalid JSON: ") + e.what());
    }
    return config_from_json(j);
  }
  return config_from_json(parse_toml(buffer.str()));
}

void validate(const ExperimentConfig& c) {
  if (!contains(kCommands, c.command)) throw ConfigError("command", "unknown command '" + c.command + "'");
  if (c.command == "scaling" && !contains(kScalingSubcommands, c.subcommand)) {
    throw ConfigError("subcommand", "unknown scaling subcommand '" + c.subcommand + "'");
  }
  if (!c.seed && c.command != "selftest") throw ConfigError("seed", "a seed is mandatory");
  if (c.format != "csv" && c.format != "json") throw ConfigError("format", "must be csv or json");
  if (c.d < 1 || c.d > kMaxDim) throw ConfigError("d", "must lie in 1..8");
  if (c.domain != "torus" && c.domain != "box") throw ConfigError("domain", "must be torus or box");
  try {
    c.law.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("law", e.what());
  }
  if (!(c.alpha > 0.0 && c.alpha <= 2.0)) throw ConfigError("alpha", "must lie in (0, 2]");
  if (!std::isfinite(c.mean)) throw ConfigError("mean", "must be finite");
  if (!(c.tol > 0.0)) throw ConfigError("tol", "must be positive");
  if (c.max_rounds < 1) throw ConfigError("max_rounds", "must be positive");
  if (c.reps < 1) throw ConfigError("reps", "must be positive");
  if (c.count < 1) throw ConfigError("count", "must be positive");
  if (c.walks < 1) throw ConfigError("walks", "must be positive");
  if (c.quadrature < 2) throw ConfigError("quadrature", "must be at least 2");
  if (c.schedule != "synchronous" && c.schedule != "checkerboard") {
    throw ConfigError("schedule", "must be synchronous or checkerboard");
  }
  if (c.method != "obstacle" && c.method != "toppling") throw ConfigError("method", "must be obstacle or toppling");
  for (std::size_t i = 0; i < c.radii.size(); ++i) {
    if (c.radii[i] < 0) throw ConfigError("radii[" + std::to_string(i) + "]", "must be nonnegative");
  }
  for (std::size_t i = 0; i < c.ns.size(); ++i) {
    if (c.ns[i] < 2) throw ConfigError("ns[" + std::to_string(i) + "]", "must be at least 2");
  }
  if (c.n != 0 && c.n < 2) throw ConfigError("n", "must be at least 2");

  // Up-front memory estimate: a handful of double fields per site.
  constexpr double kBudget = 4.0e9;
  constexpr double kBytesPerSite = 8.0 * 16.0;
  auto check_sites = [&](const std::string& field, double side, int dim) {
    const double bytes = std::pow(side, dim) * kBytesPerSite;
    if (bytes > kBudget) {
      throw ConfigError(field, "domain needs about " + std::to_string(bytes / 1e9) + " GB, over the 4 GB budget");
    }
  };
  if (c.n > 0) check_sites("n", c.n, c.d);
  for (int n : c.ns) check_sites("ns", n, c.d);
  for (int m : c.radii) check_sites("radii", 2.0 * m + 3.0, c.d);
}

}  // namespace sandpile
