#ifndef RCM_EXPERIMENTS_SWEEP_HPP
#define RCM_EXPERIMENTS_SWEEP_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "rcm/conductance.hpp"
#include "rcm/corrector.hpp"
#include "rcm/environment.hpp"
#include "rcm/experiments/analysis.hpp"
#include "rcm/experiments/config.hpp"
#include "rcm/experiments/stats.hpp"
#include "rcm/potential_walk.hpp"
#include "rcm/rng.hpp"
#include "rcm/spectral.hpp"

namespace rcm {

/// More than 5% of a sweep's samples failed.
class SweepQualityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kMaxFailureFraction = 0.05;

struct SampleRow {
  int n = 0;
  int sample = 0;
  std::uint64_t seed = 0;
  double value = 0.0;
  double residual = 0.0;
  int iterations = 0;
  double wall_ms = 0.0;
  std::string flag = "ok";  // ok | truncation | solver_failure

  bool counted() const { return flag != "solver_failure"; }
};

inline std::uint64_t sample_seed(std::uint64_t master, int n, int sample) {
  return rng::derive(master, {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(sample)});
}

/// The statistic for one (N, sample) pair; a pure function of the config.
inline SampleRow compute_sample(const SweepConfig& cfg, int n, int sample) {
  SampleRow row;
  row.n = n;
  row.sample = sample;
  row.seed = sample_seed(cfg.master_seed, n, sample);
  const auto start = std::chrono::steady_clock::now();
  try {
    switch (cfg.quantity) {
      case Quantity::diffusion_entry: {
        const Environment env = sample_environment({cfg.d, n, Closure::torus}, cfg.dist, row.seed);
        const CorrectorField corr = solve_corrector(env, cfg.tol);
        row.value = diffusion_matrix(env, corr)(cfg.entry_i, cfg.entry_j);
        row.residual = corr.residual;
        row.iterations = corr.iterations;
        break;
      }
      case Quantity::effective_conductance: {
        const Environment env = sample_environment({cfg.d, n, Closure::closed_box}, cfg.dist, row.seed);
        const PotentialSolution s = checked_mixed_potential(env, cfg.tol);
        row.value = s.f;
        row.residual = s.residual;
        row.iterations = s.iterations;
        break;
      }
      case Quantity::spectral_statistic: {
        const Environment env = sample_environment({cfg.d, n, Closure::closed_box}, cfg.dist, row.seed);
        const EigenSolution s = dirichlet_spectral_statistic(env, cfg.tol);
        row.value = s.f;
        row.residual = s.residual;
        row.iterations = s.iterations;
        break;
      }
      case Quantity::potential_statistic: {
        Coord dir{}, target{};
        for (int i = 0; i < cfg.d; ++i) {
          dir[i] = cfg.direction[i];
          target[i] = n * dir[i];
        }
        const PotentialField pot = sample_potential(Box::around(cfg.d, Coord{}, target, 1), cfg.potential, row.seed);
        const ConductanceLaw law{cfg.dist, rng::derive(row.seed, {0x636f6e64ULL})};
        GreenOptions opt;
        opt.tol = cfg.tol;
        const PointStatistic ps = point_statistic(law, pot, dir, n, opt);
        row.value = ps.value;
        row.residual = ps.green.truncation_gap;
        row.iterations = ps.green.boxes;
        if (!ps.green.converged) row.flag = "truncation";
        break;
      }
    }
  } catch (const ConvergenceError& e) {
    row.value = std::numeric_limits<double>::quiet_NaN();
    row.residual = e.residual();
    row.iterations = e.iterations();
    row.flag = "solver_failure";
  }
  if (cfg.record_timing)
    row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return row;
}

struct SweepLevel {
  int n = 0;
  SampleStats stats;
  std::vector<double> values;  // counted samples in index order
  int failures = 0;
  int truncations = 0;
};

struct SweepResult {
  SweepConfig config;
  std::vector<SampleRow> rows;  // N-major, sample-minor
  std::vector<SweepLevel> levels;
  int failures = 0;

  double failure_fraction() const { return rows.empty() ? 0.0 : static_cast<double>(failures) / rows.size(); }
  bool quality_ok() const { return failure_fraction() <= kMaxFailureFraction; }
};

/// Samples run on `threads` workers; statistics are reduced afterwards in
/// index order, so every output is identical for any thread count.
inline SweepResult run_sweep(const SweepConfig& cfg, int threads = 1) {
  cfg.validate();
  if (threads < 1) throw ParameterError("threads must be >= 1");
  SweepResult res;
  res.config = cfg;
  const std::size_t per_n = static_cast<std::size_t>(cfg.samples);
  const std::size_t total = per_n * cfg.n_list.size();
  res.rows.resize(total);

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= total) return;
      try {
        res.rows[k] = compute_sample(cfg, cfg.n_list[k / per_n], static_cast<int>(k % per_n));
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(total);
        return;
      }
    }
  };
  const int used = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(threads), total));
  if (used <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < used; ++t) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  for (std::size_t a = 0; a < cfg.n_list.size(); ++a) {
    SweepLevel level;
    level.n = cfg.n_list[a];
    for (std::size_t i = 0; i < per_n; ++i) {
      const SampleRow& r = res.rows[a * per_n + i];
      if (!r.counted()) {
        ++level.failures;
        continue;
      }
      if (r.flag == "truncation") ++level.truncations;
      level.values.push_back(r.value);
    }
    level.stats = SampleStats::of(level.values);
    res.failures += level.failures;
    res.levels.push_back(std::move(level));
  }
  return res;
}

inline void require_quality(const SweepResult& res) {
  if (!res.quality_ok())
    throw SweepQualityError(std::to_string(res.failures) + " of " + std::to_string(res.rows.size()) +
                            " samples failed (limit 5%)");
}

inline std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return detail::format_double(v);
}

inline constexpr const char* kCsvHeader = "run_id,quantity,d,N,sample,seed,value,residual,iterations,wall_ms,flag";

inline std::string sweep_csv(const SweepResult& res) {
  std::string out = std::string(kCsvHeader) + "\n";
  const std::string prefix = res.config.run_id + "," + to_string(res.config.quantity) + "," + std::to_string(res.config.d) + ",";
  for (const SampleRow& r : res.rows) {
    out += prefix + std::to_string(r.n) + "," + std::to_string(r.sample) + "," + std::to_string(r.seed) + "," +
           csv_number(r.value) + "," + csv_number(r.residual) + "," + std::to_string(r.iterations) + "," +
           csv_number(r.wall_ms) + "," + r.flag + "\n";
  }
  return out;
}

/// Bounds that speak to the sweep's quantity and law.
inline std::vector<BoundSpec> sweep_bounds(const SweepConfig& cfg) {
  const double kappa = cfg.dist.ellipticity();
  std::vector<BoundSpec> out;
  switch (cfg.quantity) {
    case Quantity::effective_conductance:
      if (std::isfinite(kappa)) {
        out.push_back(bounds::effective_conductance_elliptic(cfg.d, kappa));
      } else {
        out.push_back(bounds::effective_conductance_bounded(cfg.d, cfg.dist.upper_bound()));
        if (cfg.dist.kind == DistKind::power_low_tail) out.push_back(bounds::effective_conductance_tail(cfg.d, cfg.dist));
      }
      break;
    case Quantity::spectral_statistic: out.push_back(bounds::spectral_rate(cfg.d, kappa)); break;
    case Quantity::diffusion_entry: out.push_back(bounds::diffusion_rate(cfg.d, kappa)); break;
    case Quantity::potential_statistic: break;
  }
  return out;
}

struct BoundReport {
  BoundSpec bound;
  std::vector<BoundVerdict> verdicts;
  std::vector<std::pair<int, std::vector<TailRow>>> tails;
  bool slope_judged = false;
  bool slope_pass = true;
  bool pass = true;
};

struct SweepAnalysis {
  std::vector<ScalingPoint> points;
  std::optional<ScalingFit> fit;
  std::vector<BoundReport> bounds;
  // potential_statistic: Var f_N >= N^{-2} Var theta - 3 se
  std::vector<std::pair<int, bool>> lower_bound;
  double var_theta = std::numeric_limits<double>::quiet_NaN();
  bool pass = true;
};

inline SweepAnalysis analyse_sweep(const SweepResult& res) {
  const SweepConfig& cfg = res.config;
  SweepAnalysis a;
  for (const SweepLevel& l : res.levels)
    a.points.push_back({l.n, l.stats.variance(), l.stats.n() >= 4 ? l.stats.variance_stderr() : 0.0});
  if (a.points.size() >= 3) a.fit = scaling_fit(a.points);
  for (const BoundSpec& b : sweep_bounds(cfg)) {
    BoundReport r;
    r.bound = b;
    for (const SweepLevel& l : res.levels) {
      if (l.stats.n() == 0) continue;
      r.verdicts.push_back(bound_check(l.stats, l.n, b, b.d, b.kappa, b.gamma));
      if (!r.verdicts.back().pass) r.pass = false;
      if (b.has_tail()) {
        r.tails.emplace_back(l.n, tail_profile(l.values, l.n, b.rho, cfg.thresholds, &b));
        for (const TailRow& t : r.tails.back().second) r.pass = r.pass && t.pass;
      }
    }
    if (a.fit && std::isfinite(a.fit->slope) && b.applicable) {
      r.slope_judged = true;
      r.slope_pass = a.fit->slope <= b.slope_limit;
      r.pass = r.pass && r.slope_pass;
    }
    a.pass = a.pass && r.pass;
    a.bounds.push_back(std::move(r));
  }
  if (cfg.quantity == Quantity::potential_statistic) {
    a.var_theta = cfg.potential.log1p_variance();
    for (const SweepLevel& l : res.levels) {
      const double bound = a.var_theta / (static_cast<double>(l.n) * l.n);
      const bool ok = l.stats.n() >= 4 && l.stats.variance() >= bound - 3.0 * l.stats.variance_stderr();
      a.lower_bound.emplace_back(l.n, ok);
      a.pass = a.pass && ok;
    }
  }
  return a;
}

namespace detail {
inline nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }
}  // namespace detail

inline nlohmann::json sweep_summary(const SweepResult& res, const SweepAnalysis& a) {
  using nlohmann::json;
  using detail::number_or_null;
  const SweepConfig& cfg = res.config;
  json levels = json::array();
  for (const SweepLevel& l : res.levels)
    levels.push_back({{"N", l.n},
                      {"n", l.stats.n()},
                      {"mean", number_or_null(l.stats.mean())},
                      {"var", number_or_null(l.stats.variance())},
                      {"stderr", number_or_null(l.stats.mean_stderr())},
                      {"var_stderr", number_or_null(l.stats.variance_stderr())},
                      {"min", number_or_null(l.stats.min())},
                      {"max", number_or_null(l.stats.max())},
                      {"failures", l.failures},
                      {"truncations", l.truncations}});
  json fit;
  if (a.fit) {
    fit = {{"slope", number_or_null(a.fit->slope)},
           {"intercept", number_or_null(a.fit->intercept)},
           {"r2", number_or_null(a.fit->r2)},
           {"points", a.fit->used},
           {"weighted", a.fit->weighted},
           {"warnings", a.fit->warnings}};
  }
  json bounds = json::array();
  for (const BoundReport& r : a.bounds) {
    json verdicts = json::array();
    for (const BoundVerdict& v : r.verdicts)
      verdicts.push_back({{"N", v.n},
                          {"var", number_or_null(v.variance)},
                          {"bound", number_or_null(v.bound)},
                          {"allowance", number_or_null(v.allowance)},
                          {"scaled", number_or_null(v.scaled)},
                          {"verdict", v.judged ? (v.pass ? "pass" : "fail") : "report"}});
    json tails = json::array();
    for (const auto& [n, rows] : r.tails) {
      json trows = json::array();
      for (const TailRow& t : rows)
        trows.push_back({{"t", t.t},
                         {"count", t.count},
                         {"empirical", t.empirical},
                         {"bound", number_or_null(t.bound)},
                         {"allowance", t.allowance},
                         {"verdict", t.judged ? (t.pass ? "pass" : "fail") : "report"}});
      tails.push_back({{"N", n}, {"rows", trows}});
    }
    bounds.push_back({{"name", r.bound.name},
                      {"applicable", r.bound.applicable},
                      {"guard", r.bound.guard},
                      {"constant", number_or_null(r.bound.constant)},
                      {"exponent", r.bound.exponent},
                      {"slope_limit", r.bound.slope_limit},
                      {"slope_verdict", r.slope_judged ? (r.slope_pass ? "pass" : "fail") : "report"},
                      {"variance", verdicts},
                      {"tails", tails},
                      {"pass", r.pass}});
  }
  json out = {{"format", "rcm-sweep-summary"},
              {"version", 1},
              {"config", serialize_sweep_config(cfg)},
              {"run_id", cfg.run_id},
              {"quantity", to_string(cfg.quantity)},
              {"d", cfg.d},
              {"samples", cfg.samples},
              {"failures", res.failures},
              {"failure_fraction", res.failure_fraction()},
              {"levels", levels},
              {"fit", fit},
              {"bounds", bounds},
              {"pass", a.pass}};
  if (cfg.quantity == Quantity::potential_statistic) {
    json lb = json::array();
    for (const auto& [n, ok] : a.lower_bound)
      lb.push_back({{"N", n}, {"bound", a.var_theta / (static_cast<double>(n) * n)}, {"verdict", ok ? "pass" : "fail"}});
    out["var_theta"] = a.var_theta;
    out["variance_lower_bound"] = lb;
  }
  return out;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw FormatError("write to '" + path + "' failed");
}

}  // namespace rcm

#endif  // RCM_EXPERIMENTS_SWEEP_HPP
