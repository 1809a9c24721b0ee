#ifndef RCM_POTENTIAL_WALK_HPP
#define RCM_POTENTIAL_WALK_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <json.hpp>

#include "rcm/distribution.hpp"
#include "rcm/environment.hpp"
#include "rcm/errors.hpp"
#include "rcm/lattice.hpp"
#include "rcm/numerics/operator.hpp"
#include "rcm/rng.hpp"

namespace rcm {

/// Finite window of Z^d: interior sites lower .. lower + side - 1 in every
/// coordinate, plus the absorbing layer around it. Lattice index space is
/// that of the closed box [0, side+1]^d; local c maps to global lower + c - 1.
struct Box {
  int d = 2;
  Coord lower{};
  int side = 1;

  LatticeSpec lattice() const { return {d, side, Closure::closed_box}; }

  Coord to_global(const Coord& local) const {
    Coord g{};
    for (int i = 0; i < d; ++i) g[i] = lower[i] + local[i] - 1;
    return g;
  }
  Coord to_local(const Coord& global) const {
    Coord c{};
    for (int i = 0; i < d; ++i) c[i] = global[i] - lower[i] + 1;
    return c;
  }
  bool contains(const Coord& global) const {
    for (int i = 0; i < d; ++i)
      if (global[i] < lower[i] || global[i] >= lower[i] + side) return false;
    return true;
  }
  std::size_t index(const Coord& global) const { return lattice().index(to_local(global)); }

  /// Box of the given side centred on the midpoint of x and y.
  static Box around(int d, const Coord& x, const Coord& y, int side) {
    Box b{d, {}, side};
    for (int i = 0; i < d; ++i) {
      const int mid = static_cast<int>(std::floor((x[i] + y[i]) / 2.0));
      b.lower[i] = mid - side / 2;
    }
    return b;
  }

  bool operator==(const Box&) const = default;
};

inline int sup_distance(int d, const Coord& x, const Coord& y) {
  int m = 0;
  for (int i = 0; i < d; ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

namespace detail {
inline constexpr std::uint64_t kPotentialTag = 0x706f74656e7469ULL;
}

/// V at a global site, a pure function of (dist, seed, position).
inline double draw_site_value(const DistributionSpec& dist, std::uint64_t seed, const Coord& x, int d) {
  rng::CounterStream stream(rng::derive(seed, {detail::kPotentialTag, canonical_site_key(x, d)}));
  return dist.sample(stream.uniform_open_closed());
}

/// Killing potential V >= 0 on a box; theta = log(1 + V) is derived on
/// demand. Sites outside the box are drawn from (dist, seed) when the law
/// is samplable, so growing the box keeps every value already seen.
struct PotentialField {
  Box box;
  DistributionSpec dist;
  std::uint64_t seed = 0;
  std::vector<double> values;               // per box lattice index
  std::map<Coord, double> overrides;        // global site -> V, wins over draws

  double V(const Coord& global) const {
    if (auto it = overrides.find(global); it != overrides.end()) return it->second;
    if (box.contains(global)) return values[box.index(global)];
    if (dist.kind == DistKind::explicit_values) throw UsageError("potential not available outside its box");
    return draw_site_value(dist, seed, global, box.d);
  }
  double theta(const Coord& global) const { return std::log1p(V(global)); }

  /// Copy with one site's potential replaced.
  PotentialField with_value(const Coord& global, double v) const {
    if (!(v >= 0) || !std::isfinite(v)) throw ParameterError("potential values must be finite and >= 0");
    PotentialField out = *this;
    out.overrides[global] = v;
    if (box.contains(global)) out.values[box.index(global)] = v;
    return out;
  }

  bool extendable() const { return dist.kind != DistKind::explicit_values; }

  bool operator==(const PotentialField&) const = default;
};

inline PotentialField sample_potential(const Box& box, const DistributionSpec& dist, std::uint64_t seed) {
  box.lattice().validate();
  dist.validate_potential();
  PotentialField p{box, dist, seed, {}, {}};
  const LatticeSpec lat = box.lattice();
  p.values.resize(lat.site_count());
  for (std::size_t s = 0; s < lat.site_count(); ++s) {
    const double v = draw_site_value(dist, seed, box.to_global(lat.coords(s)), box.d);
    // theta is derived from V; check the defining identity on the stored value
    if (!(v >= 0) || std::exp(-std::log1p(v)) * (1.0 + v) - 1.0 > 1e-12)
      throw ParameterError("potential draw outside [0, inf)");
    p.values[s] = v;
  }
  return p;
}

inline nlohmann::json potential_to_json(const PotentialField& p) {
  nlohmann::json overrides = nlohmann::json::array();
  for (const auto& [x, v] : p.overrides)
    overrides.push_back({{"x", std::vector<int>(x.begin(), x.begin() + p.box.d)}, {"V", v}});
  return {{"format", "rcm-potential"},
          {"version", 1},
          {"d", p.box.d},
          {"lower", std::vector<int>(p.box.lower.begin(), p.box.lower.begin() + p.box.d)},
          {"side", p.box.side},
          {"dist", distribution_to_json(p.dist)},
          {"seed", p.seed},
          {"values", p.values},
          {"overrides", overrides}};
}

inline PotentialField potential_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "rcm-potential") throw FormatError("not a potential file");
    if (j.at("version").get<int>() != 1) throw FormatError("unsupported potential file version");
    PotentialField p;
    p.box.d = j.at("d").get<int>();
    p.box.side = j.at("side").get<int>();
    const auto lower = j.at("lower").get<std::vector<int>>();
    if (static_cast<int>(lower.size()) != p.box.d) throw FormatError("potential file: bad lower corner");
    std::copy(lower.begin(), lower.end(), p.box.lower.begin());
    p.box.lattice().validate();
    p.dist = distribution_from_json(j.at("dist"));
    p.seed = j.at("seed").get<std::uint64_t>();
    p.values = j.at("values").get<std::vector<double>>();
    if (p.values.size() != p.box.lattice().site_count()) throw FormatError("potential file: wrong value count");
    for (const auto& o : j.at("overrides")) {
      Coord x{};
      const auto xs = o.at("x").get<std::vector<int>>();
      std::copy(xs.begin(), xs.end(), x.begin());
      p.overrides[x] = o.at("V").get<double>();
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed potential file: ") + e.what());
  } catch (const ParameterError& e) {
    throw FormatError(std::string("invalid potential file: ") + e.what());
  }
}

inline void save_potential(const PotentialField& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out << potential_to_json(p).dump() << '\n';
}

inline PotentialField load_potential(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return potential_from_json(nlohmann::json::parse(buf.str()));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("corrupt potential file '" + path + "': " + e.what());
  }
}

/// Conductances of the walk, drawn lazily by global edge position.
struct ConductanceLaw {
  DistributionSpec dist = DistributionSpec::constant(1.0);
  std::uint64_t seed = 0;
};

/// Closed-box environment over `box` whose edges carry the law's draws at
/// their global positions.
inline Environment box_environment(const Box& box, const ConductanceLaw& law) {
  const LatticeSpec lat = box.lattice();
  lat.validate();
  law.dist.validate_conductance();
  Environment env{lat, law.dist, law.seed, std::vector<double>(lat.site_count() * lat.d, 0.0)};
  for (std::size_t s = 0; s < lat.site_count(); ++s) {
    const Coord g = box.to_global(lat.coords(s));
    for (int i = 0; i < lat.d; ++i)
      if (env.has_edge(s, i)) env.weights[s * lat.d + i] = draw_edge_weight(law.dist, law.seed, g, lat.d, i);
  }
  return env;
}

/// Killed walk on one box with absorbing outer layer. In the symmetric form
/// S = M - A with m(x) = a(x)(1 + V(x)), (I - B) = M^{-1} S and
/// G = S^{-1} M, so the row G(x, .) is (S^{-1} e_x) * m.
class KilledWalk {
 public:
  KilledWalk(const Environment& env, const Box& box, const PotentialField& pot)
      : env_(&env), box_(box), op_(env, BoundaryCondition::dirichlet) {
    if (!(env.lattice == box.lattice())) throw UsageError("KilledWalk: environment does not match the box");
    const std::size_t n = op_.unknown_count();
    m_.resize(static_cast<Eigen::Index>(n));
    v_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      v_[k] = pot.V(box.to_global(env.lattice.coords(op_.site_of(k))));
      if (!(v_[k] >= 0)) throw ParameterError("negative potential");
      m_(static_cast<Eigen::Index>(k)) = op_.site_weight(k) * (1.0 + v_[k]);
    }
  }

  const Box& box() const noexcept { return box_; }
  std::size_t unknown_count() const noexcept { return op_.unknown_count(); }
  const LaplacianOperator& op() const noexcept { return op_; }
  double m(std::size_t k) const { return m_(static_cast<Eigen::Index>(k)); }
  double potential(std::size_t k) const { return v_[k]; }

  std::int64_t unknown(const Coord& global) const {
    if (!box_.contains(global)) return -1;
    return op_.unknown_of(box_.index(global));
  }

  /// G(x, .) on the unknowns. Sites in `removed` are absorbing as well.
  Eigen::VectorXd green_row(std::size_t x, const std::vector<std::size_t>& removed = {}) const {
    const auto keep = kept(removed);
    const auto s = symmetric(keep);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(keep.size()));
    const auto pos = position(keep, x);
    rhs(pos) = 1.0;
    const Eigen::VectorXd w = solve(s, rhs);
    Eigen::VectorXd row = Eigen::VectorXd::Zero(m_.size());
    for (std::size_t i = 0; i < keep.size(); ++i)
      row(static_cast<Eigen::Index>(keep[i])) = w(static_cast<Eigen::Index>(i)) * m_(static_cast<Eigen::Index>(keep[i]));
    return row;
  }

  /// P_x(tau_y < tau_x^+) for the killed walk: first step from x, then reach
  /// y before x without being killed or absorbed.
  double escape_probability(std::size_t x, std::size_t y) const {
    if (x == y) throw UsageError("escape_probability requires x != y");
    const auto keep = kept({x, y});
    const auto s = symmetric(keep);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(keep.size()));
    std::vector<std::int64_t> where(unknown_count(), -1);
    for (std::size_t i = 0; i < keep.size(); ++i) where[keep[i]] = static_cast<std::int64_t>(i);
    for (std::size_t i = 0; i < keep.size(); ++i)
      for (const auto& l : op_.links(keep[i]))
        if (l.unknown == static_cast<std::int64_t>(y)) rhs(static_cast<Eigen::Index>(i)) += l.weight;
    const Eigen::VectorXd h = solve(s, rhs);
    double p = 0.0;
    for (const auto& l : op_.links(x)) {
      if (l.unknown < 0 || l.unknown == static_cast<std::int64_t>(x)) continue;
      const double hz = l.unknown == static_cast<std::int64_t>(y) ? 1.0 : h(where[l.unknown]);
      p += l.weight * hz;
    }
    return p / m_(static_cast<Eigen::Index>(x));
  }

 private:
  using Sparse = Eigen::SparseMatrix<double>;

  std::vector<std::size_t> kept(const std::vector<std::size_t>& removed) const {
    std::vector<std::size_t> keep;
    keep.reserve(unknown_count());
    for (std::size_t k = 0; k < unknown_count(); ++k)
      if (std::find(removed.begin(), removed.end(), k) == removed.end()) keep.push_back(k);
    return keep;
  }

  static Eigen::Index position(const std::vector<std::size_t>& keep, std::size_t k) {
    const auto it = std::lower_bound(keep.begin(), keep.end(), k);
    if (it == keep.end() || *it != k) throw UsageError("site was removed");
    return static_cast<Eigen::Index>(it - keep.begin());
  }

  Sparse symmetric(const std::vector<std::size_t>& keep) const {
    std::vector<std::int64_t> where(unknown_count(), -1);
    for (std::size_t i = 0; i < keep.size(); ++i) where[keep[i]] = static_cast<std::int64_t>(i);
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(keep.size() * (2 * box_.d + 1));
    for (std::size_t i = 0; i < keep.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      t.emplace_back(row, row, m_(static_cast<Eigen::Index>(keep[i])));
      for (const auto& l : op_.links(keep[i]))
        if (l.unknown >= 0 && where[l.unknown] >= 0) t.emplace_back(row, where[l.unknown], -l.weight);
    }
    Sparse s(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(keep.size()));
    s.setFromTriplets(t.begin(), t.end());
    return s;
  }

  // S is an M-matrix, so the factor's triangular solves only add nonnegative
  // terms and keep small entries accurate; two refinement passes clean up.
  static Eigen::VectorXd solve(const Sparse& s, const Eigen::VectorXd& rhs) {
    Eigen::SimplicialLDLT<Sparse> ldlt(s);
    if (ldlt.info() != Eigen::Success) throw ConvergenceError("killed-walk factorisation failed", 0.0, 0);
    Eigen::VectorXd w = ldlt.solve(rhs);
    for (int pass = 0; pass < 2; ++pass) {
      const Eigen::VectorXd r = rhs - s * w;
      w += ldlt.solve(r);
    }
    return w;
  }

  const Environment* env_;
  Box box_;
  LaplacianOperator op_;
  Eigen::VectorXd m_;
  std::vector<double> v_;
};

struct GreenOptions {
  double tol = 1e-10;                    // relative change of G(x, y) between boxes
  std::size_t max_sites = 400000;        // cap on (side + 2)^d
  int initial_side = 0;                  // 0: 2 |x - y|_inf + 4
};

struct GreenSolution {
  Box box;
  Eigen::VectorXd row;        // G(x, .) on the final box's unknowns
  double value = 0.0;         // G(x, y)
  double log_value = 0.0;
  double truncation_gap = 0.0;
  bool converged = false;     // false: cap reached with gap > tol (a warning)
  int boxes = 0;
};

/// G(x, y) of the killed walk on Z^d, approximated on doubling boxes with
/// absorbing boundary; values increase with the box.
inline GreenSolution green_function(const ConductanceLaw& law, const PotentialField& pot, const Coord& x,
                                    const Coord& y, const GreenOptions& opt = {}) {
  const int d = pot.box.d;
  if (!(opt.tol > 0)) throw ParameterError("green_function: tol must be positive");
  int side = opt.initial_side > 0 ? opt.initial_side : 2 * sup_distance(d, x, y) + 4;
  GreenSolution out;
  double previous = 0.0;
  for (;;) {
    const Box box = Box::around(d, x, y, side);
    if (!pot.extendable()) {
      // a fixed potential file: stay inside it
      bool inside = true;
      for (int i = 0; i < d; ++i)
        if (box.lower[i] < pot.box.lower[i] || box.lower[i] + side > pot.box.lower[i] + pot.box.side) inside = false;
      if (!inside && out.boxes > 0) break;
      if (!inside) throw UsageError("potential field does not cover x and y");
    }
    const Environment env = box_environment(box, law);
    const KilledWalk walk(env, box, pot);
    const auto xi = walk.unknown(x), yi = walk.unknown(y);
    out.row = walk.green_row(static_cast<std::size_t>(xi));
    out.box = box;
    out.value = out.row(yi);
    ++out.boxes;
    if (out.boxes > 1) {
      out.truncation_gap = std::abs(out.value - previous) / out.value;
      if (out.truncation_gap <= opt.tol) {
        out.converged = true;
        break;
      }
    }
    previous = out.value;
    double next_sites = 1.0;
    for (int i = 0; i < d; ++i) next_sites *= 2.0 * side + 2.0;
    if (next_sites > static_cast<double>(opt.max_sites)) break;
    side *= 2;
  }
  if (out.boxes == 1) out.truncation_gap = std::numeric_limits<double>::infinity();
  out.log_value = std::log(out.value);
  return out;
}

/// Log-scale pieces of G(x, y) on one box, x != y:
///   exact:   G(x,y) = G(x,x) P_x(tau_y < tau_x^+) G^{x}(y,y)
///   literal: G(x,x) P_x(tau_y < tau_x^+) G(y,y), which double counts returns to x
/// where G^{x} is the Green function with x made absorbing.
struct LastVisitDecomposition {
  double log_g_xy = 0.0;
  double log_g_xx = 0.0;
  double log_escape = 0.0;        // log P_x(tau_y < tau_x^+)
  double log_g_yy_avoiding_x = 0.0;
  double log_g_yy = 0.0;
  double lhs = 0.0;               // log G(x, y)
  double rhs = 0.0;               // exact decomposition
  double gap = 0.0;               // |lhs - rhs|
  double literal_gap = 0.0;       // |lhs - literal|
};

inline LastVisitDecomposition last_visit_decomposition(const KilledWalk& walk, const Coord& x, const Coord& y) {
  const auto xi = walk.unknown(x), yi = walk.unknown(y);
  if (xi < 0 || yi < 0) throw UsageError("x and y must lie inside the box");
  if (xi == yi) throw UsageError("last_visit_decomposition requires x != y");
  const auto xs = static_cast<std::size_t>(xi), ys = static_cast<std::size_t>(yi);
  LastVisitDecomposition r;
  const Eigen::VectorXd gx = walk.green_row(xs);
  const Eigen::VectorXd gy = walk.green_row(ys);
  const Eigen::VectorXd gy_x = walk.green_row(ys, {xs});
  r.log_g_xy = std::log(gx(yi));
  r.log_g_xx = std::log(gx(xi));
  r.log_g_yy = std::log(gy(yi));
  r.log_g_yy_avoiding_x = std::log(gy_x(yi));
  r.log_escape = std::log(walk.escape_probability(xs, ys));
  r.lhs = r.log_g_xy;
  r.rhs = r.log_g_xx + r.log_escape + r.log_g_yy_avoiding_x;
  r.gap = std::abs(r.lhs - r.rhs);
  r.literal_gap = std::abs(r.lhs - (r.log_g_xx + r.log_escape + r.log_g_yy));
  return r;
}

/// Decomposition on the box the doubling scheme settles on for (x, y).
inline LastVisitDecomposition last_visit_decomposition(const ConductanceLaw& law, const PotentialField& pot,
                                                       const Coord& x, const Coord& y, const GreenOptions& opt = {}) {
  const GreenSolution g = green_function(law, pot, x, y, opt);
  const Environment env = box_environment(g.box, law);
  return last_visit_decomposition(KilledWalk(env, g.box, pot), x, y);
}

struct PointStatistic {
  double value = 0.0;      // -N^{-1} log G(0, N x)
  GreenSolution green;
};

inline PointStatistic point_statistic(const ConductanceLaw& law, const PotentialField& pot, const Coord& direction,
                                      int n, const GreenOptions& opt = {}) {
  const int d = pot.box.d;
  bool nonzero = false;
  for (int i = 0; i < d; ++i) nonzero = nonzero || direction[i] != 0;
  if (!nonzero) throw UsageError("point_statistic: direction must be nonzero");
  if (n < 1) throw ParameterError("point_statistic: N must be >= 1");
  Coord target{};
  for (int i = 0; i < d; ++i) target[i] = n * direction[i];
  PointStatistic out;
  out.green = green_function(law, pot, Coord{}, target, opt);
  out.value = -out.green.log_value / n;
  return out;
}

struct VarianceExperimentConfig {
  int d = 2;
  Coord direction{1};
  int n = 2;
  int samples = 400;
  DistributionSpec potential = DistributionSpec::two_point(0.5, 0.0, 1.718281828459045);
  ConductanceLaw conductances{};
  std::uint64_t master_seed = 1;
  GreenOptions green{};
};

struct VarianceExperimentReport {
  int n = 0;
  int samples = 0;
  double mean = 0.0;
  double variance = 0.0;
  double stderr_variance = 0.0;   // from the fourth central moment
  double var_theta = 0.0;         // analytic Var theta(0)
  double bound = 0.0;             // N^{-2} Var theta(0)
  bool pass = false;              // variance >= bound - 3 stderr
  double fkg_covariance = 0.0;    // Cov(log G(x,x), log P_x(tau_y < tau_x^+)), report only
  double max_decomposition_gap = 0.0;
  double max_literal_gap = 0.0;
  double max_truncation_gap = 0.0;
  int unconverged = 0;
  std::vector<double> values;
};

/// Sample seed i at side N: derive(master, {N, i}).
inline VarianceExperimentReport variance_lower_bound_experiment(const VarianceExperimentConfig& cfg) {
  if (cfg.samples < 20) throw UsageError("variance experiment needs at least 20 samples");
  cfg.potential.validate_potential();
  if (cfg.potential.degenerate() && cfg.potential.sample(1.0) == 0.0)
    throw ParameterError("potential law must not be concentrated on zero");
  VarianceExperimentReport rep;
  rep.n = cfg.n;
  rep.samples = cfg.samples;
  rep.var_theta = cfg.potential.log1p_variance();
  rep.bound = rep.var_theta / (static_cast<double>(cfg.n) * cfg.n);
  Coord target{};
  for (int i = 0; i < cfg.d; ++i) target[i] = cfg.n * cfg.direction[i];
  std::vector<double> lgx, lesc;
  for (int i = 0; i < cfg.samples; ++i) {
    const std::uint64_t seed = rng::derive(cfg.master_seed, {static_cast<std::uint64_t>(cfg.n), static_cast<std::uint64_t>(i)});
    Box b = Box::around(cfg.d, Coord{}, target, 1);
    const PotentialField pot = sample_potential(b, cfg.potential, seed);
    const PointStatistic ps = point_statistic(cfg.conductances, pot, cfg.direction, cfg.n, cfg.green);
    rep.values.push_back(ps.value);
    rep.max_truncation_gap = std::max(rep.max_truncation_gap, ps.green.truncation_gap);
    if (!ps.green.converged) ++rep.unconverged;
    const Environment env = box_environment(ps.green.box, cfg.conductances);
    const LastVisitDecomposition lv = last_visit_decomposition(KilledWalk(env, ps.green.box, pot), Coord{}, target);
    rep.max_decomposition_gap = std::max(rep.max_decomposition_gap, lv.gap);
    rep.max_literal_gap = std::max(rep.max_literal_gap, lv.literal_gap);
    lgx.push_back(lv.log_g_xx);
    lesc.push_back(lv.log_escape);
  }
  const double m = rep.values.size();
  double s = 0;
  for (double v : rep.values) s += v;
  rep.mean = s / m;
  double m2 = 0, m4 = 0;
  for (double v : rep.values) {
    const double c = v - rep.mean;
    m2 += c * c;
    m4 += c * c * c * c;
  }
  rep.variance = m2 / (m - 1);
  const double mu2 = m2 / m, mu4 = m4 / m;
  rep.stderr_variance = std::sqrt(std::max(0.0, (mu4 - (m - 3) / (m - 1) * mu2 * mu2) / m));
  rep.pass = rep.variance >= rep.bound - 3.0 * rep.stderr_variance;
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < lgx.size(); ++i) {
    ma += lgx[i];
    mb += lesc[i];
  }
  ma /= m;
  mb /= m;
  double cov = 0;
  for (std::size_t i = 0; i < lgx.size(); ++i) cov += (lgx[i] - ma) * (lesc[i] - mb);
  rep.fkg_covariance = cov / (m - 1);
  return rep;
}

}  // namespace rcm

#endif  // RCM_POTENTIAL_WALK_HPP
