#ifndef RCM_TOOLS_COMMANDS_HPP
#define RCM_TOOLS_COMMANDS_HPP

// Command-line front end. run() parses argv, dispatches, and maps library
// errors to exit codes: 0 ok, 2 configuration, 3 solver, 4 sweep quality.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rcm/conductance.hpp"
#include "rcm/corrector.hpp"
#include "rcm/environment.hpp"
#include "rcm/errors.hpp"
#include "rcm/experiments/config.hpp"
#include "rcm/experiments/svg.hpp"
#include "rcm/experiments/sweep.hpp"
#include "rcm/potential_walk.hpp"
#include "rcm/spectral.hpp"

namespace rcm::cli {

enum ExitCode { kOk = 0, kConfig = 2, kSolver = 3, kSweepQuality = 4 };

namespace detail {

struct EnvArgs {
  std::string env_file;
  int d = 0;
  int n = 0;
  std::string dist = "constant:1";
  std::uint64_t seed = 1;
  std::string weights;

  void add_to(CLI::App* app) {
    app->add_option("--env", env_file, "environment file written by gen-env");
    app->add_option("--d", d, "dimension");
    app->add_option("--n", n, "box side N");
    app->add_option("--dist", dist, "conductance law, e.g. uniform-elliptic:2")->capture_default_str();
    app->add_option("--seed", seed, "environment seed")->capture_default_str();
    app->add_option("--weights", weights, "explicit canonical edge weights, comma separated");
  }

  Environment build(Closure closure) const {
    if (!env_file.empty()) {
      Environment env = load_environment(env_file);
      if (env.lattice.closure != closure)
        throw UsageError("environment file has the wrong closure for this computation");
      return env;
    }
    if (d < 1 || n < 1) throw ParameterError("give --env, or --d and --n");
    const LatticeSpec lat{d, n, closure};
    if (!weights.empty()) return make_environment(lat, rcm::detail::parse_list(weights));
    return sample_environment(lat, parse_distribution(dist), seed);
  }
};

inline Coord parse_coord(const std::string& s, int d) {
  const auto xs = rcm::detail::parse_list(s);
  if (static_cast<int>(xs.size()) != d) throw ParameterError("site '" + s + "' needs " + std::to_string(d) + " components");
  Coord c{};
  for (int i = 0; i < d; ++i) c[i] = static_cast<int>(xs[i]);
  return c;
}

inline nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[j] = m(i, j);
    rows.push_back(r);
  }
  return rows;
}

inline void emit(const nlohmann::json& j, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << j.dump(2) << '\n';
  } else {
    write_text_file(path, j.dump(2) + "\n");
    out << path << '\n';
  }
}

}  // namespace detail

inline int gen_env(const LatticeSpec& lat, const std::string& dist_text, std::uint64_t seed, const std::string& path,
                   std::ostream& out) {
  const DistributionSpec dist = parse_distribution(dist_text);
  const Environment env = sample_environment(lat, dist, seed);
  save_environment(env, path);
  const auto w = env.canonical_weights();
  const auto [lo, hi] = std::minmax_element(w.begin(), w.end());
  const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
  out << path << '\n'
      << "edges " << w.size() << "  min " << *lo << "  max " << *hi << "  mean " << mean << '\n';
  return kOk;
}

struct ComputeArgs {
  std::string what;
  detail::EnvArgs env;
  double tol = 1e-10;
  std::string output;
  std::vector<int> entry{0, 0};
  // green
  std::string potential = "two-point:0.5,0,1.718281828459045";
  std::string potential_file;
  std::uint64_t potential_seed = 1;
  std::string x, y;
  std::size_t max_sites = GreenOptions{}.max_sites;
};

inline nlohmann::json compute(const ComputeArgs& a) {
  using nlohmann::json;
  if (a.what == "diffusion") {
    const Environment env = a.env.build(Closure::torus);
    const CorrectorField corr = solve_corrector(env, a.tol);
    const Eigen::MatrixXd dm = diffusion_matrix(env, corr);
    const CorrectorDiagnostics diag = corrector_diagnostics(env, corr);
    if (a.entry.size() != 2 || a.entry[0] < 0 || a.entry[1] < 0 || a.entry[0] >= env.d() || a.entry[1] >= env.d())
      throw ParameterError("--entry must be i,j with 0 <= i,j < d");
    return {{"quantity", "diffusion"},
            {"d", env.d()},
            {"N", env.n()},
            {"value", dm(a.entry[0], a.entry[1])},
            {"entry", a.entry},
            {"matrix", detail::matrix_json(dm)},
            {"residual", corr.residual},
            {"iterations", corr.iterations},
            {"diagnostics",
             {{"sup_norm", diag.sup_norm},
              {"sup_ratio", diag.sup_ratio},
              {"energy_ratio", diag.energy_ratio},
              {"energy_bound_holds", diag.energy_bound_holds}}}};
  }
  if (a.what == "conductance") {
    const Environment env = a.env.build(Closure::closed_box);
    const PotentialSolution s = checked_mixed_potential(env, a.tol);
    return {{"quantity", "conductance"}, {"d", env.d()},          {"N", env.n()},
            {"value", s.f},              {"energy", s.energy},     {"edge_energy", s.edge_energy},
            {"flux_low", s.flux_low},    {"flux_high", s.flux_high}, {"residual", s.residual},
            {"iterations", s.iterations}};
  }
  if (a.what == "spectral") {
    const Environment env = a.env.build(Closure::closed_box);
    const EigenSolution s = dirichlet_spectral_statistic(env, a.tol);
    return {{"quantity", "spectral"},
            {"d", env.d()},
            {"N", env.n()},
            {"value", s.lambda},
            {"lambda", s.lambda},
            {"f", s.f},
            {"residual", s.residual},
            {"iterations", s.iterations},
            {"sup_diagnostic", eigenfunction_sup_diagnostic(s)}};
  }
  if (a.what == "green") {
    PotentialField pot;
    int d = a.env.d;
    if (!a.potential_file.empty()) {
      pot = load_potential(a.potential_file);
      d = pot.box.d;
    } else {
      if (d < 1) throw ParameterError("green needs --d or --potential-file");
      pot = sample_potential(Box{d, {}, 1}, parse_distribution(a.potential), a.potential_seed);
    }
    if (a.x.empty() || a.y.empty()) throw ParameterError("green needs --x and --y");
    const Coord x = detail::parse_coord(a.x, d), y = detail::parse_coord(a.y, d);
    const ConductanceLaw law{parse_distribution(a.env.dist), a.env.seed};
    GreenOptions opt;
    opt.tol = a.tol;
    opt.max_sites = a.max_sites;
    const GreenSolution g = green_function(law, pot, x, y, opt);
    json out{{"quantity", "green"},
             {"d", d},
             {"value", g.value},
             {"log_value", g.log_value},
             {"box_side", g.box.side},
             {"boxes", g.boxes},
             {"truncation_gap", rcm::detail::number_or_null(g.truncation_gap)},
             {"converged", g.converged}};
    if (!(x == y)) {
      const Environment env = box_environment(g.box, law);
      const LastVisitDecomposition lv = last_visit_decomposition(KilledWalk(env, g.box, pot), x, y);
      out["last_visit"] = {{"lhs", lv.lhs},
                           {"rhs", lv.rhs},
                           {"gap", lv.gap},
                           {"literal_gap", lv.literal_gap},
                           {"log_escape", lv.log_escape}};
    }
    return out;
  }
  throw ParameterError("unknown computation '" + a.what + "'");
}

struct SweepArgs {
  std::string config;
  std::vector<std::string> set;
  int threads = 1;
  bool plot = false;
  bool print_config = false;
  std::string out_dir = ".";
};

inline int sweep(const SweepArgs& a, std::ostream& out, std::ostream& err) {
  SweepConfig cfg;
  if (!a.config.empty()) cfg = load_sweep_config(a.config);
  for (const std::string& kv : a.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ParameterError("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, rcm::detail::trim(kv.substr(0, eq)), rcm::detail::trim(kv.substr(eq + 1)));
  }
  cfg.validate();
  if (a.print_config) {
    out << serialize_sweep_config(cfg);
    return kOk;
  }
  const SweepResult res = run_sweep(cfg, a.threads);
  const SweepAnalysis analysis = analyse_sweep(res);
  std::filesystem::create_directories(a.out_dir);
  const std::filesystem::path base = std::filesystem::path(a.out_dir) / cfg.output;
  write_text_file(base.string() + ".csv", sweep_csv(res));
  write_text_file(base.string() + ".summary.json", sweep_summary(res, analysis).dump(2) + "\n");
  out << base.string() << ".csv\n" << base.string() << ".summary.json\n";
  if (a.plot) {
    const BoundSpec* bound = analysis.bounds.empty() ? nullptr : &analysis.bounds.front().bound;
    write_text_file(base.string() + "_variance.svg",
                    svg::variance_plot(analysis.points, analysis.fit ? &*analysis.fit : nullptr, bound,
                                       cfg.run_id + ": log Var against log N"));
    out << base.string() << "_variance.svg\n";
    for (const BoundReport& r : analysis.bounds)
      for (const auto& [n, rows] : r.tails) {
        const std::string path = base.string() + "_tail_" + r.bound.name + "_N" + std::to_string(n) + ".svg";
        write_text_file(path, svg::tail_plot(rows, cfg.run_id + ": tail profile, N = " + std::to_string(n)));
        out << path << '\n';
      }
  }
  for (const SweepLevel& l : res.levels)
    out << "N=" << l.n << "  n=" << l.stats.n() << "  mean=" << l.stats.mean() << "  var=" << l.stats.variance()
        << "  failures=" << l.failures << '\n';
  if (analysis.fit) out << "slope=" << analysis.fit->slope << "  r2=" << analysis.fit->r2 << '\n';
  out << "verdict: " << (analysis.pass ? "pass" : "fail") << '\n';
  if (!res.quality_ok()) {
    err << "error: " << res.failures << " of " << res.rows.size() << " samples failed (limit 5%)\n";
    return kSweepQuality;
  }
  return kOk;
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Random conductance model: environments, homogenization statistics and Monte Carlo sweeps", "rcm"};
  app.require_subcommand(1);

  // gen-env
  int ge_d = 0, ge_n = 0;
  std::string ge_closure = "closed_box", ge_dist, ge_out;
  std::uint64_t ge_seed = 1;
  auto* ge = app.add_subcommand("gen-env", "sample an environment and save it");
  ge->add_option("--d", ge_d, "dimension")->required();
  ge->add_option("--n", ge_n, "box side N")->required();
  ge->add_option("--dist", ge_dist, "conductance law, e.g. uniform-elliptic:2")->required();
  ge->add_option("--seed", ge_seed, "seed")->capture_default_str();
  ge->add_option("--closure", ge_closure, "torus or closed_box")->capture_default_str();
  ge->add_option("-o,--output", ge_out, "output file")->required();

  // compute
  ComputeArgs ca;
  auto* co = app.add_subcommand("compute", "one statistic for one environment, printed as JSON");
  co->add_option("what", ca.what, "diffusion | conductance | spectral | green")
      ->required()
      ->check(CLI::IsMember({"diffusion", "conductance", "spectral", "green"}));
  ca.env.add_to(co);
  co->add_option("--tol", ca.tol, "solver tolerance")->capture_default_str();
  co->add_option("--entry", ca.entry, "diffusion matrix entry reported as value")->delimiter(',')->expected(2);
  co->add_option("--potential", ca.potential, "law of V (green)")->capture_default_str();
  co->add_option("--potential-file", ca.potential_file, "potential file (green)");
  co->add_option("--potential-seed", ca.potential_seed, "seed of V (green)")->capture_default_str();
  co->add_option("--x", ca.x, "start site, comma separated (green)");
  co->add_option("--y", ca.y, "target site, comma separated (green)");
  co->add_option("--max-sites", ca.max_sites, "cap on truncation box size (green)")->capture_default_str();
  co->add_option("-o,--output", ca.output, "write JSON here instead of stdout");

  // sweep
  SweepArgs sa;
  auto* sw = app.add_subcommand("sweep", "Monte Carlo sweep over N and seeds; writes CSV and summary JSON");
  sw->add_option("--config", sa.config, "flat key = value config file (version = 1)");
  sw->add_option("--set", sa.set, "override a config key, key=value; applied after the file");
  sw->add_option("--threads", sa.threads, "worker threads; outputs do not depend on it")->capture_default_str();
  sw->add_flag("--plot", sa.plot, "also write SVG plots");
  sw->add_flag("--print-config", sa.print_config, "print the effective config and exit");
  sw->add_option("--out-dir", sa.out_dir, "output directory")->capture_default_str();
  sw->footer("config keys: version run_id quantity entry d n_list dist potential direction samples master_seed tol "
             "thresholds record_timing output\nprecedence: built-in defaults < --config file < --set");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kConfig;
  }

  try {
    if (ge->parsed()) {
      Closure closure;
      if (ge_closure == "torus")
        closure = Closure::torus;
      else if (ge_closure == "closed_box")
        closure = Closure::closed_box;
      else
        throw ParameterError("--closure must be torus or closed_box");
      return gen_env({ge_d, ge_n, closure}, ge_dist, ge_seed, ge_out, out);
    }
    if (co->parsed()) {
      detail::emit(compute(ca), ca.output, out);
      return kOk;
    }
    return sweep(sa, out, err);
  } catch (const ConvergenceError& e) {
    err << "solver error: " << e.what() << '\n';
    return kSolver;
  } catch (const SweepQualityError& e) {
    err << "sweep error: " << e.what() << '\n';
    return kSweepQuality;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kConfig;
  }
}

inline int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args);
}

}  // namespace rcm::cli

#endif  // RCM_TOOLS_COMMANDS_HPP
