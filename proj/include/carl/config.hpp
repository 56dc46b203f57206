#pragma once

// Run configuration: a fixed registry of typed keys with defaults, loaded from
// a line-oriented file
//
//     # comment
//     [model]
//     kappa = 0.075
//     D = 1.49
//
// and then overridden by command-line flags. Every key lives in exactly one
// section; keys before any header are accepted if they are known. Unknown
// keys, wrong sections, type mismatches and out-of-range values are rejected
// with the offending key and line.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "carl/csv.hpp"
#include "carl/params.hpp"

namespace carl {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ValueKind { real, integer, boolean, text };

using ConfigValue = std::variant<double, long long, bool, std::string>;

struct KeySpec {
  std::string section;
  std::string name;
  ValueKind kind;
  ConfigValue default_value;
  std::string help;
  /// Empty string when valid, otherwise a range diagnostic.
  std::function<std::string(const ConfigValue&)> check;
};

namespace detail {

inline std::function<std::string(const ConfigValue&)> positive() {
  return [](const ConfigValue& v) -> std::string {
    const double x = std::holds_alternative<double>(v) ? std::get<double>(v)
                                                       : static_cast<double>(std::get<long long>(v));
    return x > 0.0 && std::isfinite(x) ? "" : "must be > 0";
  };
}

inline std::function<std::string(const ConfigValue&)> non_negative() {
  return [](const ConfigValue& v) -> std::string {
    const double x = std::holds_alternative<double>(v) ? std::get<double>(v)
                                                       : static_cast<double>(std::get<long long>(v));
    return x >= 0.0 && std::isfinite(x) ? "" : "must be >= 0";
  };
}

inline std::function<std::string(const ConfigValue&)> at_least(long long lo) {
  return [lo](const ConfigValue& v) -> std::string {
    return std::get<long long>(v) >= lo ? "" : "must be >= " + std::to_string(lo);
  };
}

inline std::function<std::string(const ConfigValue&)> one_of(std::vector<std::string> choices) {
  return [choices](const ConfigValue& v) -> std::string {
    const auto& s = std::get<std::string>(v);
    for (const auto& c : choices)
      if (c == s) return "";
    std::string msg = "must be one of";
    for (const auto& c : choices) msg += " " + c;
    return msg;
  };
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline const std::vector<KeySpec>& config_registry() {
  using namespace detail;
  const double kc = 2.0 * std::numbers::pi * 22.0e3;
  static const std::vector<KeySpec> registry = {
      {"general", "output_dir", ValueKind::text, std::string("results"), "directory for CSV/JSON output", nullptr},
      {"general", "seed", ValueKind::integer, 12345LL, "RNG seed for stochastic runs", non_negative()},

      {"model", "kappa", ValueKind::real, 0.075, "scaled cavity loss kappa", positive()},
      {"model", "D", ValueKind::real, 1.49, "scaled diffusion D", non_negative()},
      {"model", "a0", ValueKind::real, 1e-5, "initial (real) seed field", non_negative()},
      {"model", "gamma_bar", ValueKind::real, 50.0, "scaled friction for the full particle model", positive()},

      {"fp", "n_max", ValueKind::integer, 32LL, "highest retained Fourier harmonic", at_least(2)},
      {"fp", "dt", ValueKind::real, 0.01, "RK4 output step", positive()},
      {"fp", "t_end", ValueKind::real, 400.0, "integration horizon in tau", positive()},
      {"fp", "sample_every", ValueKind::integer, 10LL, "steps between trajectory samples", at_least(1)},
      {"fp", "tail_tolerance", ValueKind::real, 1e-8, "|B_nmax| above which n_max doubles", positive()},
      {"fp", "stop_at_steady", ValueKind::boolean, false, "stop once the steady criterion holds", nullptr},
      {"fp", "steady_tolerance", ValueKind::real, 1e-9, "relative change defining steady state", positive()},
      {"fp", "steady_window", ValueKind::real, 10.0, "window (tau) for the steady criterion", positive()},
      {"fp", "density_points", ValueKind::integer, 256LL, "theta points in density output", at_least(2)},

      {"sde", "mode", ValueKind::text, std::string("overdamped"), "overdamped | full", one_of({"overdamped", "full"})},
      {"sde", "n_particles", ValueKind::integer, 100000LL, "number of simulated particles", at_least(1)},
      {"sde", "dtau", ValueKind::real, 0.01, "overdamped Euler-Maruyama step", positive()},
      {"sde", "dt_bar", ValueKind::real, 1e-3, "full-model step in t_bar units", positive()},
      {"sde", "sde_t_end", ValueKind::real, 100.0, "stochastic horizon in tau", positive()},
      {"sde", "sde_sample_every", ValueKind::integer, 50LL, "steps between samples", at_least(1)},
      {"sde", "phase_init", ValueKind::text, std::string("uniform"), "uniform | evenly_spaced", one_of({"uniform", "evenly_spaced"})},

      {"steady", "newton_tolerance", ValueKind::real, 1e-12, "self-consistency residual target", positive()},
      {"steady", "newton_max_iterations", ValueKind::integer, 200LL, "Newton iteration cap", at_least(1)},

      {"sweep", "d_min", ValueKind::real, 0.05, "first D of sweep-d", positive()},
      {"sweep", "d_max", ValueKind::real, 2.2, "last D of sweep-d", positive()},
      {"sweep", "d_count", ValueKind::integer, 87LL, "points in sweep-d", at_least(2)},

      {"ramp", "ratio_min", ValueKind::real, 0.5, "lowest P0/P_T", positive()},
      {"ramp", "ratio_max", ValueKind::real, 4.0, "highest P0/P_T", positive()},
      {"ramp", "ratio_count", ValueKind::integer, 71LL, "points in the ramp", at_least(2)},

      {"grid", "kappa_min", ValueKind::real, 0.05, "instability map: smallest kappa", positive()},
      {"grid", "kappa_max", ValueKind::real, 5.0, "instability map: largest kappa", positive()},
      {"grid", "kappa_count", ValueKind::integer, 61LL, "instability map: kappa points (log-spaced)", at_least(1)},
      {"grid", "grid_d_min", ValueKind::real, 0.05, "instability map: smallest D", positive()},
      {"grid", "grid_d_max", ValueKind::real, 5.0, "instability map: largest D", positive()},
      {"grid", "grid_d_count", ValueKind::integer, 61LL, "instability map: D points (log-spaced)", at_least(1)},

      {"physical", "kappa_c", ValueKind::real, kc, "cavity loss rate, rad/s", positive()},
      {"physical", "gamma_f", ValueKind::real, 9.0 * kc, "molasses friction rate, rad/s", positive()},
      {"physical", "temperature", ValueKind::real, 150.0e-6, "atom temperature, K", positive()},
      {"physical", "atom_mass", ValueKind::real, constants::rb87_mass, "atom mass, kg", positive()},
      {"physical", "wavelength", ValueKind::real, constants::rb87_d2_wavelength, "pump wavelength, m", positive()},
      {"physical", "atom_count", ValueKind::real, 1.0e6, "number of atoms N", positive()},
      {"physical", "sigma_prefactor", ValueKind::real, 2.0, "sigma = prefactor k v_T / (omega_r rho)", positive()},
      {"physical", "rho", ValueKind::real, 0.0, "CARL parameter; 0 selects rho at threshold", non_negative()},

      {"scaling", "scaling_sweep", ValueKind::text, std::string("temperature"), "temperature | kappa_c | gamma_f | atom_count", one_of({"temperature", "kappa_c", "gamma_f", "atom_count"})},
      {"scaling", "scaling_regime", ValueKind::text, std::string("good"), "good | bad", one_of({"good", "bad"})},
      {"scaling", "scaling_observable", ValueKind::text, std::string("pump"), "pump | shift", one_of({"pump", "shift"})},
      {"scaling", "factor_min", ValueKind::real, 0.3, "smallest sweep multiplier", positive()},
      {"scaling", "factor_max", ValueKind::real, 3.0, "largest sweep multiplier", positive()},
      {"scaling", "factor_count", ValueKind::integer, 9LL, "sweep points (log-spaced)", at_least(2)},
  };
  return registry;
}

inline const KeySpec* find_key(const std::string& name) {
  for (const auto& k : config_registry())
    if (k.name == name) return &k;
  return nullptr;
}

/// Parses one textual value according to a key's kind; empty optional on mismatch.
inline std::optional<ConfigValue> parse_value(const KeySpec& spec, const std::string& text) {
  switch (spec.kind) {
    case ValueKind::real: {
      double v = 0.0;
      auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || p != text.data() + text.size()) return std::nullopt;
      return v;
    }
    case ValueKind::integer: {
      long long v = 0;
      auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || p != text.data() + text.size()) return std::nullopt;
      return v;
    }
    case ValueKind::boolean:
      if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
      if (text == "false" || text == "0" || text == "no" || text == "off") return false;
      return std::nullopt;
    case ValueKind::text:
      if (text.empty()) return std::nullopt;
      return text;
  }
  return std::nullopt;
}

inline std::string value_to_string(const ConfigValue& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, double>) return csv::format_double(x);
        else if constexpr (std::is_same_v<T, long long>) return std::to_string(x);
        else if constexpr (std::is_same_v<T, bool>) return x ? "true" : "false";
        else return x;
      },
      v);
}

class RunConfig {
 public:
  RunConfig() {
    for (const auto& k : config_registry()) {
      values_[k.name] = k.default_value;
      origin_[k.name] = "default";
    }
  }

  /// Sets a key from text. `where` names the source for diagnostics.
  void set(const std::string& key, const std::string& text, const std::string& where) {
    const KeySpec* spec = find_key(key);
    if (!spec) throw ConfigError(where + ": unknown key '" + key + "'");
    auto parsed = parse_value(*spec, text);
    if (!parsed) throw ConfigError(where + ": key '" + key + "' expects " + kind_name(spec->kind) +
                                   ", got '" + text + "'");
    if (spec->check) {
      const std::string problem = spec->check(*parsed);
      if (!problem.empty())
        throw ConfigError(where + ": key '" + key + "' " + problem + ", got " + text);
    }
    values_[key] = *parsed;
    origin_[key] = where;
  }

  /// Sets a default-layer value (figure presets), validated but recorded as a preset.
  void preset(const std::string& key, const ConfigValue& value) {
    if (!find_key(key)) throw ConfigError("preset: unknown key '" + key + "'");
    values_[key] = value;
    origin_[key] = "preset";
  }

  void load_stream(std::istream& in, const std::string& source) {
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string where = source + ":" + std::to_string(line_no);
      const auto hash = line.find('#');
      std::string body = detail::trim(hash == std::string::npos ? line : line.substr(0, hash));
      if (body.empty()) continue;
      if (body.front() == '[') {
        if (body.back() != ']') throw ConfigError(where + ": malformed section header");
        section = detail::trim(body.substr(1, body.size() - 2));
        bool known = false;
        for (const auto& k : config_registry()) known = known || k.section == section;
        if (!known) throw ConfigError(where + ": unknown section [" + section + "]");
        continue;
      }
      const auto eq = body.find('=');
      if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
      const std::string key = detail::trim(body.substr(0, eq));
      const std::string value = detail::trim(body.substr(eq + 1));
      const KeySpec* spec = find_key(key);
      if (!spec) throw ConfigError(where + ": unknown key '" + key + "'");
      if (!section.empty() && spec->section != section)
        throw ConfigError(where + ": key '" + key + "' belongs in [" + spec->section +
                          "], not [" + section + "]");
      set(key, value, where);
    }
  }

  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    load_stream(in, path);
  }

  double real(const std::string& key) const { return std::get<double>(at(key)); }
  long long integer(const std::string& key) const { return std::get<long long>(at(key)); }
  bool boolean(const std::string& key) const { return std::get<bool>(at(key)); }
  const std::string& text(const std::string& key) const { return std::get<std::string>(at(key)); }
  const std::string& origin(const std::string& key) const { return origin_.at(key); }

  const std::map<std::string, ConfigValue>& values() const { return values_; }

  static const char* kind_name(ValueKind k) {
    switch (k) {
      case ValueKind::real: return "a real number";
      case ValueKind::integer: return "an integer";
      case ValueKind::boolean: return "true/false";
      case ValueKind::text: return "a non-empty string";
    }
    return "?";
  }

 private:
  const ConfigValue& at(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown key '" + key + "'");
    return it->second;
  }

  std::map<std::string, ConfigValue> values_;
  std::map<std::string, std::string> origin_;
};

inline RunConfig parse_config(const std::string& path) {
  RunConfig cfg;
  cfg.load_file(path);
  return cfg;
}

/// Laboratory parameters from the [physical] section.
inline PhysicalParams physical_from(const RunConfig& cfg) {
  PhysicalParams p;
  p.kappa_c = cfg.real("kappa_c");
  p.gamma_f = cfg.real("gamma_f");
  p.temperature = cfg.real("temperature");
  p.atom_mass = cfg.real("atom_mass");
  p.wavenumber = 2.0 * std::numbers::pi / cfg.real("wavelength");
  p.atom_count = cfg.real("atom_count");
  p.sigma_prefactor = cfg.real("sigma_prefactor");
  p.validate();
  return p;
}

}  // namespace carl
