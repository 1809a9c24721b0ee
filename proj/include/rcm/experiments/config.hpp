#ifndef RCM_EXPERIMENTS_CONFIG_HPP
#define RCM_EXPERIMENTS_CONFIG_HPP

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rcm/distribution.hpp"
#include "rcm/errors.hpp"
#include "rcm/lattice.hpp"

namespace rcm {

enum class Quantity { diffusion_entry, effective_conductance, spectral_statistic, potential_statistic };

inline std::string to_string(Quantity q) {
  switch (q) {
    case Quantity::diffusion_entry: return "diffusion_entry";
    case Quantity::effective_conductance: return "effective_conductance";
    case Quantity::spectral_statistic: return "spectral_statistic";
    case Quantity::potential_statistic: return "potential_statistic";
  }
  return "?";
}

inline Quantity parse_quantity(const std::string& s) {
  for (Quantity q : {Quantity::diffusion_entry, Quantity::effective_conductance, Quantity::spectral_statistic,
                     Quantity::potential_statistic})
    if (to_string(q) == s) return q;
  throw ParameterError("unknown quantity '" + s + "'");
}

inline constexpr int kConfigVersion = 1;

/// One Monte Carlo sweep. For potential_statistic, `dist` is the conductance
/// law of the walk and `potential` the law of V.
struct SweepConfig {
  std::string run_id = "run";
  Quantity quantity = Quantity::effective_conductance;
  int entry_i = 0, entry_j = 0;
  int d = 3;
  std::vector<int> n_list{4, 8};
  DistributionSpec dist = DistributionSpec::uniform_elliptic(2.0);
  DistributionSpec potential = DistributionSpec::two_point(0.5, 0.0, 1.718281828459045);
  std::vector<int> direction{1};
  int samples = 20;
  std::uint64_t master_seed = 1;
  double tol = 1e-10;
  std::vector<double> thresholds{1, 2, 4, 8};
  bool record_timing = false;
  std::string output = "sweep";

  bool operator==(const SweepConfig&) const = default;

  void validate() const {
    if (d < 1 || d > kMaxDim) throw ParameterError("d must be in 1.." + std::to_string(kMaxDim));
    if (samples < 1) throw ParameterError("samples must be >= 1");
    if (n_list.empty()) throw ParameterError("n_list must not be empty");
    for (std::size_t k = 0; k < n_list.size(); ++k) {
      if (n_list[k] < 1) throw ParameterError("every N must be >= 1");
      if (k > 0 && n_list[k] <= n_list[k - 1]) throw ParameterError("n_list must be strictly increasing");
    }
    if (!(tol > 0)) throw ParameterError("tol must be positive");
    if (run_id.empty() || run_id.find_first_of(",\n\r\"") != std::string::npos)
      throw ParameterError("run_id must be nonempty and free of commas, quotes and newlines");
    for (double t : thresholds)
      if (!(t > 0)) throw ParameterError("thresholds must be positive");
    dist.validate_conductance();
    if (dist.kind == DistKind::explicit_values) throw ParameterError("sweeps need a samplable law");
    switch (quantity) {
      case Quantity::diffusion_entry:
        if (entry_i < 0 || entry_i >= d || entry_j < 0 || entry_j >= d)
          throw ParameterError("entry indices must lie in 0..d-1");
        for (int n : n_list)
          if (n < 2) throw ParameterError("diffusion_entry needs N >= 2 on the torus");
        break;
      case Quantity::potential_statistic: {
        potential.validate_potential();
        if (potential.degenerate() && potential.sample(1.0) == 0.0)
          throw ParameterError("potential law must not be concentrated on zero");
        if (static_cast<int>(direction.size()) != d) throw ParameterError("direction needs d components");
        if (std::all_of(direction.begin(), direction.end(), [](int v) { return v == 0; }))
          throw ParameterError("direction must be nonzero");
        break;
      }
      default: break;
    }
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline int parse_int(const std::string& key, const std::string& v) {
  const double x = parse_double(v);
  if (x != static_cast<int>(x)) throw ParameterError(key + ": expected an integer, got '" + v + "'");
  return static_cast<int>(x);
}

inline std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (double x : parse_list(v)) {
    if (x != static_cast<int>(x)) throw ParameterError(key + ": expected integers");
    out.push_back(static_cast<int>(x));
  }
  return out;
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string s;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (k) s += ',';
    if constexpr (std::is_same_v<T, double>)
      s += format_double(xs[k]);
    else
      s += std::to_string(xs[k]);
  }
  return s;
}

}  // namespace detail

inline const std::vector<std::string>& sweep_config_keys() {
  static const std::vector<std::string> keys{"version",  "run_id",    "quantity", "entry",      "d",
                                             "n_list",   "dist",      "potential", "direction", "samples",
                                             "master_seed", "tol",    "thresholds", "record_timing", "output"};
  return keys;
}

/// Apply one key to the config. Throws ParameterError for unknown keys or
/// bad values; shared by the file parser and command-line overrides.
inline void set_config_value(SweepConfig& c, const std::string& key, const std::string& value) {
  if (key == "version") {
    if (detail::parse_int(key, value) != kConfigVersion)
      throw ParameterError("unsupported config version " + value);
  } else if (key == "run_id") {
    c.run_id = value;
  } else if (key == "quantity") {
    c.quantity = parse_quantity(value);
  } else if (key == "entry") {
    const auto ij = detail::parse_int_list(key, value);
    if (ij.size() != 2) throw ParameterError("entry expects i,j");
    c.entry_i = ij[0];
    c.entry_j = ij[1];
  } else if (key == "d") {
    c.d = detail::parse_int(key, value);
  } else if (key == "n_list") {
    c.n_list = detail::parse_int_list(key, value);
  } else if (key == "dist") {
    c.dist = parse_distribution(value);
  } else if (key == "potential") {
    c.potential = parse_distribution(value);
  } else if (key == "direction") {
    c.direction = detail::parse_int_list(key, value);
  } else if (key == "samples") {
    c.samples = detail::parse_int(key, value);
  } else if (key == "master_seed") {
    try {
      std::size_t used = 0;
      c.master_seed = std::stoull(value, &used);
      if (used != value.size()) throw ParameterError("");
    } catch (const std::exception&) {
      throw ParameterError("master_seed: expected an unsigned integer, got '" + value + "'");
    }
  } else if (key == "tol") {
    c.tol = detail::parse_double(value);
  } else if (key == "thresholds") {
    c.thresholds = value.empty() ? std::vector<double>{} : detail::parse_list(value);
  } else if (key == "record_timing") {
    if (value != "true" && value != "false") throw ParameterError("record_timing expects true or false");
    c.record_timing = value == "true";
  } else if (key == "output") {
    c.output = value;
  } else {
    throw ParameterError("unknown config key '" + key + "'");
  }
}

/// Flat "key = value" text, '#' starts a comment. `version` must be present.
inline SweepConfig parse_sweep_config(const std::string& text) {
  SweepConfig c;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParameterError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq)), value = detail::trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw ParameterError("config key '" + key + "' given twice");
    set_config_value(c, key, value);
  }
  if (!seen.count("version")) throw ParameterError("config file lacks 'version = 1'");
  c.validate();
  return c;
}

inline std::string serialize_sweep_config(const SweepConfig& c) {
  std::ostringstream out;
  out << "version = " << kConfigVersion << '\n'
      << "run_id = " << c.run_id << '\n'
      << "quantity = " << to_string(c.quantity) << '\n'
      << "entry = " << c.entry_i << ',' << c.entry_j << '\n'
      << "d = " << c.d << '\n'
      << "n_list = " << detail::join(c.n_list) << '\n'
      << "dist = " << to_string(c.dist) << '\n'
      << "potential = " << to_string(c.potential) << '\n'
      << "direction = " << detail::join(c.direction) << '\n'
      << "samples = " << c.samples << '\n'
      << "master_seed = " << c.master_seed << '\n'
      << "tol = " << detail::format_double(c.tol) << '\n'
      << "thresholds = " << detail::join(c.thresholds) << '\n'
      << "record_timing = " << (c.record_timing ? "true" : "false") << '\n'
      << "output = " << c.output << '\n';
  return out.str();
}

inline SweepConfig load_sweep_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_sweep_config(buf.str());
}

}  // namespace rcm

#endif  // RCM_EXPERIMENTS_CONFIG_HPP
