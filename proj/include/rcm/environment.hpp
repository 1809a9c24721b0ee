#ifndef RCM_ENVIRONMENT_HPP
#define RCM_ENVIRONMENT_HPP

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rcm/distribution.hpp"
#include "rcm/errors.hpp"
#include "rcm/lattice.hpp"
#include "rcm/rng.hpp"

namespace rcm {

inline constexpr int kEnvironmentFormatVersion = 1;

/// Edge conductances on a finite lattice. One value per undirected edge,
/// stored at (site, dir) for the edge {x, x + e_dir}; torus edges wrap.
/// On a closed box the slots with x[dir] == N+1 have no edge and hold 0.
struct Environment {
  LatticeSpec lattice;
  DistributionSpec dist;
  std::uint64_t seed = 0;
  std::vector<double> weights;

  int d() const noexcept { return lattice.d; }
  int n() const noexcept { return lattice.n; }

  int coordinate(std::size_t site, int axis) const noexcept {
    return static_cast<int>((site / lattice.stride(axis)) % static_cast<std::size_t>(lattice.side()));
  }

  bool has_edge(std::size_t site, int dir) const noexcept {
    return lattice.closure == Closure::torus || coordinate(site, dir) <= lattice.n;
  }

  double weight(std::size_t site, int dir) const noexcept {
    return weights[site * static_cast<std::size_t>(lattice.d) + static_cast<std::size_t>(dir)];
  }
  double weight(const Edge& e) const noexcept { return weight(e.site, e.dir); }

  /// Neighbour of `site` one step along +e_dir (sign > 0) or -e_dir. On a
  /// torus the step wraps; on a closed box the caller checks the range.
  std::size_t step(std::size_t site, int dir, int sign) const noexcept {
    const int c = coordinate(site, dir);
    const std::size_t st = lattice.stride(dir);
    if (lattice.closure == Closure::torus) {
      if (sign > 0) return c + 1 == lattice.n ? site - st * static_cast<std::size_t>(c) : site + st;
      return c == 0 ? site + st * static_cast<std::size_t>(lattice.n - 1) : site - st;
    }
    return sign > 0 ? site + st : site - st;
  }

  std::size_t edge_count() const noexcept {
    std::size_t count = 0;
    for (std::size_t s = 0; s < lattice.site_count(); ++s)
      for (int i = 0; i < lattice.d; ++i)
        if (has_edge(s, i)) ++count;
    return count;
  }

  /// Copy with one edge weight replaced.
  Environment with_weight(const Edge& e, double w) const {
    if (!has_edge(e.site, e.dir)) throw UsageError("with_weight: no such edge");
    if (!(w > 0)) throw ParameterError("conductances must be strictly positive");
    Environment out = *this;
    out.weights[e.site * static_cast<std::size_t>(lattice.d) + static_cast<std::size_t>(e.dir)] = w;
    return out;
  }

  /// Weights in canonical order (lexicographic site, then direction).
  std::vector<double> canonical_weights() const {
    std::vector<double> out;
    out.reserve(edge_count());
    for (std::size_t s = 0; s < lattice.site_count(); ++s)
      for (int i = 0; i < lattice.d; ++i)
        if (has_edge(s, i)) out.push_back(weight(s, i));
    return out;
  }

  bool operator==(const Environment&) const = default;
};

/// Conductance of edge (site, dir) as drawn from `dist` under `seed`; a pure
/// function of (seed, edge position), independent of enumeration order.
inline double draw_edge_weight(const DistributionSpec& dist, std::uint64_t seed, const Coord& x, int d, int dir) {
  rng::CounterStream stream(rng::derive(seed, {canonical_edge_key(x, d, dir)}));
  return dist.sample(stream.uniform_open_closed());
}

inline Environment sample_environment(const LatticeSpec& lattice, const DistributionSpec& dist, std::uint64_t seed) {
  lattice.validate();
  dist.validate_conductance();
  if (dist.kind == DistKind::explicit_values) throw ParameterError("explicit_values cannot be sampled");
  Environment env{lattice, dist, seed, {}};
  const std::size_t sites = lattice.site_count();
  env.weights.assign(sites * static_cast<std::size_t>(lattice.d), 0.0);
  for (std::size_t s = 0; s < sites; ++s) {
    const Coord x = lattice.coords(s);
    for (int i = 0; i < lattice.d; ++i)
      if (env.has_edge(s, i)) env.weights[s * lattice.d + i] = draw_edge_weight(dist, seed, x, lattice.d, i);
  }
  return env;
}

/// Environment from caller-supplied weights in canonical edge order.
inline Environment make_environment(const LatticeSpec& lattice, const std::vector<double>& canonical) {
  lattice.validate();
  Environment env{lattice, DistributionSpec::explicit_values(), 0, {}};
  const std::size_t sites = lattice.site_count();
  env.weights.assign(sites * static_cast<std::size_t>(lattice.d), 0.0);
  std::size_t k = 0;
  for (std::size_t s = 0; s < sites; ++s)
    for (int i = 0; i < lattice.d; ++i) {
      if (!env.has_edge(s, i)) continue;
      if (k >= canonical.size())
        throw ParameterError("expected " + std::to_string(env.edge_count()) + " weights, got " +
                             std::to_string(canonical.size()));
      if (!(canonical[k] > 0)) throw ParameterError("conductances must be strictly positive");
      env.weights[s * lattice.d + i] = canonical[k++];
    }
  if (k != canonical.size())
    throw ParameterError("expected " + std::to_string(k) + " weights, got " + std::to_string(canonical.size()));
  return env;
}

/// Weight of the N-periodic extension between two neighbours of Z^d.
inline double periodic_weight(const Environment& env, const Coord& x, const Coord& y) {
  if (env.lattice.closure != Closure::torus) throw UsageError("periodic_weight requires a torus environment");
  int axis = -1, l1 = 0;
  for (int i = 0; i < env.d(); ++i) {
    const int diff = std::abs(x[i] - y[i]);
    l1 += diff;
    if (diff == 1) axis = i;
  }
  if (l1 != 1 || axis < 0) throw UsageError("periodic_weight: points are not nearest neighbours");
  const Coord& lower = x[axis] < y[axis] ? x : y;
  return env.weight(env.lattice.index(wrap(env.lattice, lower)), axis);
}

/// a(x): sum of the conductances of all edges incident to x.
inline double site_weight(const Environment& env, std::size_t site) {
  double total = 0.0;
  for (int i = 0; i < env.d(); ++i) {
    if (env.has_edge(site, i)) total += env.weight(site, i);
    if (env.lattice.closure == Closure::torus) {
      total += env.weight(env.step(site, i, -1), i);
    } else if (env.coordinate(site, i) >= 1) {
      total += env.weight(env.step(site, i, -1), i);
    }
  }
  return total;
}

inline nlohmann::json distribution_to_json(const DistributionSpec& d) {
  return {{"kind", kind_name(d.kind)}, {"params", distribution_params(d)}};
}

inline DistributionSpec distribution_from_json(const nlohmann::json& j) {
  return make_distribution(j.at("kind").get<std::string>(), j.at("params").get<std::vector<double>>());
}

inline nlohmann::json environment_to_json(const Environment& env) {
  return {{"format", "rcm-environment"},
          {"version", kEnvironmentFormatVersion},
          {"d", env.d()},
          {"N", env.n()},
          {"closure", to_string(env.lattice.closure)},
          {"dist", distribution_to_json(env.dist)},
          {"seed", env.seed},
          {"weights", env.canonical_weights()}};
}

inline Environment environment_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "rcm-environment") throw FormatError("not an environment file");
    const int version = j.at("version").get<int>();
    if (version != kEnvironmentFormatVersion)
      throw FormatError("environment format version " + std::to_string(version) + " is not supported (expected " +
                        std::to_string(kEnvironmentFormatVersion) + ")");
    LatticeSpec lat{j.at("d").get<int>(), j.at("N").get<int>(), closure_from_string(j.at("closure").get<std::string>())};
    Environment env = make_environment(lat, j.at("weights").get<std::vector<double>>());
    env.dist = distribution_from_json(j.at("dist"));
    env.seed = j.at("seed").get<std::uint64_t>();
    return env;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed environment file: ") + e.what());
  } catch (const ParameterError& e) {
    throw FormatError(std::string("invalid environment file: ") + e.what());
  }
}

inline void save_environment(const Environment& env, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out << environment_to_json(env).dump() << '\n';
  if (!out) throw FormatError("write to '" + path + "' failed");
}

inline Environment load_environment(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("corrupt environment file '" + path + "': " + e.what());
  }
  return environment_from_json(j);
}

}  // namespace rcm

#endif  // RCM_ENVIRONMENT_HPP
