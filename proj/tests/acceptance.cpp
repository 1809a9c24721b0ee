// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers to
// run a subset and --report PATH to archive the measured values as JSON.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <thread>

#include <Eigen/Dense>
#include <json.hpp>

#include "rcm/conductance.hpp"
#include "rcm/corrector.hpp"
#include "rcm/experiments/sweep.hpp"
#include "rcm/numerics/dense.hpp"
#include "rcm/potential_walk.hpp"
#include "rcm/spectral.hpp"
#include "support.hpp"

using namespace rcm;
using nlohmann::json;
using rcm::testing::box_env;
using rcm::testing::gather;
using rcm::testing::torus_env;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  json data = json::object();
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int worker_count() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

const auto kElliptic2 = DistributionSpec::uniform_elliptic(2.0);
const auto kTwoPoint = DistributionSpec::two_point(0.5, 0.5, 2.0);

// 1. closed forms for constant environments
Outcome closed_forms() {
  const auto t0 = std::chrono::steady_clock::now();
  double d_err = 0, f_err = 0, l_err = 0;
  for (int d : {1, 2, 3})
    for (int n : {4, 8}) {
      const Environment env = torus_env(d, n, DistributionSpec::constant(1), 1);
      const Eigen::MatrixXd dm = diffusion_matrix(env, solve_corrector(env));
      d_err = std::max(d_err, (dm - Eigen::MatrixXd::Identity(d, d) / d).cwiseAbs().maxCoeff());
      f_err = std::max(f_err, std::abs(effective_conductance(box_env(d, n, DistributionSpec::constant(1), 1)) - 2.0));
    }
  for (int d : {1, 2})
    for (int n : {3, 4, 8}) {
      // minimum over modes k in {1..N}^d of 1 - (1/d) sum cos(k_i pi/(N+1))
      const double lambda = 1.0 - std::cos(std::numbers::pi / (n + 1));
      l_err = std::max(l_err, std::abs(dirichlet_spectral_statistic(box_env(d, n, DistributionSpec::constant(1), 1)).lambda -
                                       lambda));
    }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = d_err <= 1e-10 && f_err <= 1e-10 && l_err <= 1e-8 && secs < 5.0;
  o.detail = "max |D - I/d| " + fmt(d_err) + ", max |f - 2| " + fmt(f_err) + ", max |lambda - closed form| " +
             fmt(l_err) + ", " + fmt(secs) + " s";
  o.data = {{"diffusion_error", d_err}, {"conductance_error", f_err}, {"lambda_error", l_err}, {"seconds", secs}};
  return o;
}

// 2. one-dimensional harmonic-mean and series-resistor formulas
Outcome one_dimensional() {
  std::mt19937_64 gen(20240);
  std::uniform_real_distribution<double> w(0.1, 10.0);
  std::uniform_int_distribution<int> size(2, 24);
  double d_err = 0, v_err = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = size(gen);
    std::vector<double> torus(n), box(n + 1);
    for (double& x : torus) x = w(gen);
    for (double& x : box) x = w(gen);
    const Environment te = make_environment({1, n, Closure::torus}, torus);
    double s = 0, sinv = 0;
    for (double x : torus) {
      s += x;
      sinv += 1 / x;
    }
    const double dm = diffusion_matrix(te, solve_corrector(te, 1e-13))(0, 0);
    d_err = std::max(d_err, std::abs(dm - static_cast<double>(n) * n / (s * sinv)));

    const Environment be = make_environment({1, n, Closure::closed_box}, box);
    const PotentialSolution p = solve_mixed_potential(be, 1e-13);
    double rinv = 0;
    for (double x : box) rinv += 1 / x;
    const double current = (n + 1) / rinv;
    double v = 0;
    for (int i = 0; i <= n + 1; ++i) {
      v_err = std::max(v_err, std::abs(p.v.values[i] - v));
      if (i <= n) v += current / box[i];
    }
  }
  Outcome o;
  o.pass = d_err <= 1e-10 && v_err <= 1e-10;
  o.detail = "100 weight vectors: max |D - N^2/(sum a sum 1/a)| " + fmt(d_err) + ", max |v - series resistor| " + fmt(v_err);
  o.data = {{"diffusion_error", d_err}, {"potential_error", v_err}};
  return o;
}

// 3. matrix-free solvers against dense factorizations
Outcome dense_equivalence() {
  double chi_err = 0, dm_err = 0, v_err = 0, lambda_err = 0, psi_err = 0, green_err = 0;
  int cases = 0;
  for (int d : {2, 3}) {
    const std::vector<int> sides = d == 2 ? std::vector<int>{3, 4} : std::vector<int>{3};
    for (int k = 0; k < 25; ++k, ++cases) {
      const int n = sides[k % sides.size()];
      const std::uint64_t seed = 1000 * d + k;

      const Environment te = torus_env(d, n, kElliptic2, seed);
      const CorrectorField c = solve_corrector(te, 1e-12);
      const auto ref = rcm::testing::dense_corrector(te);
      const DenseSystem ps = dense_oracle(te, BoundaryCondition::periodic);
      for (int i = 0; i < d; ++i) chi_err = std::max(chi_err, (gather(ps, c.chi[i]) - ref[i]).cwiseAbs().maxCoeff());
      dm_err = std::max(dm_err, (diffusion_matrix(te, c) - rcm::testing::dense_diffusion(te, ref)).cwiseAbs().maxCoeff());

      const Environment be = box_env(d, n, kTwoPoint, seed);
      const PotentialSolution p = solve_mixed_potential(be, 1e-12);
      const DenseSystem ms = dense_oracle(be, BoundaryCondition::mixed_faces);
      const Eigen::VectorXd vref = ms.h.partialPivLu().solve(-ms.offset);
      v_err = std::max(v_err, (gather(ms, p.v) - vref).cwiseAbs().maxCoeff());

      const EigenSolution e = dirichlet_spectral_statistic(be, 1e-12);
      const DenseSystem ds = dense_oracle(be, BoundaryCondition::dirichlet);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ds.symmetrized());
      lambda_err = std::max(lambda_err, std::abs(e.lambda - es.eigenvalues()(0)));
      Eigen::VectorXd psi = es.eigenvectors().col(0).cwiseQuotient(ds.weight.cwiseSqrt());
      if (psi.sum() < 0) psi = -psi;
      psi /= std::sqrt(psi.cwiseProduct(psi).dot(ds.weight));
      psi_err = std::max(psi_err, (gather(ds, e.psi) - psi).cwiseAbs().maxCoeff());

      Box box{d, {}, n};
      const ConductanceLaw law{kElliptic2, seed};
      const PotentialField pot = sample_potential(box, DistributionSpec::two_point(0.5, 0.0, 1.0), seed);
      const Environment ge = box_environment(box, law);
      const KilledWalk walk(ge, box, pot);
      const rcm::testing::DenseKilled gd = rcm::testing::dense_green(box, law, pot);
      const Coord x = gd.sites[k % gd.sites.size()];
      const Eigen::VectorXd row = walk.green_row(walk.unknown(x));
      for (const Coord& y : gd.sites)
        green_err = std::max(green_err, std::abs(row(walk.unknown(y)) - gd.g(gd.at(x), gd.at(y))));
    }
  }
  const double worst = std::max({chi_err, dm_err, v_err, lambda_err, psi_err, green_err});
  Outcome o;
  o.pass = worst <= 1e-8;
  o.detail = std::to_string(cases) + " environments: corrector " + fmt(chi_err) + ", D " + fmt(dm_err) + ", potential " +
             fmt(v_err) + ", lambda " + fmt(lambda_err) + ", psi " + fmt(psi_err) + ", Green " + fmt(green_err);
  o.data = {{"corrector", chi_err}, {"diffusion", dm_err}, {"potential", v_err},
            {"lambda", lambda_err}, {"psi", psi_err},      {"green", green_err}};
  return o;
}

// 4. deterministic inequalities, per environment
Outcome exact_inequalities() {
  std::mt19937_64 gen(44);
  double gg_err = 0;
  bool energy_ok = true, max_ok = true, green_ok = true;
  int corr_fail = 0, cond_fail = 0, eig_fail = 0, checks = 0;
  double corr_slack = INFINITY, cond_slack = INFINITY;
  int corr_ordered_fail = 0, cond_ordered_fail = 0;
  for (int d : {2, 3}) {
    const int n = 4;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Environment te = torus_env(d, n, kElliptic2, 40 + seed);
      const Environment be = box_env(d, n, kElliptic2, 80 + seed);
      // Green-Gauss, each edge once
      for (const auto& [env, bc] : {std::pair{&te, BoundaryCondition::periodic}, std::pair{&be, BoundaryCondition::dirichlet}}) {
        LaplacianOperator op(*env, bc);
        const Field u = bc == BoundaryCondition::periodic ? rcm::testing::random_field(env->lattice, seed)
                                                          : rcm::testing::random_interior_field(env->lattice, seed);
        const Field v = bc == BoundaryCondition::periodic ? rcm::testing::random_field(env->lattice, seed + 7)
                                                          : rcm::testing::random_interior_field(env->lattice, seed + 7);
        const double huv = weighted_inner(*env, op.apply(u), v);
        const double scale = std::sqrt(edge_form(op, u, u) * edge_form(op, v, v));
        gg_err = std::max(gg_err, std::abs(edge_form(op, u, v) - huv) / scale);
      }
      energy_ok = energy_ok && corrector_diagnostics(te, solve_corrector(te)).energy_bound_holds;
      const PotentialSolution p = solve_mixed_potential(be);
      for (double v : p.v.values) max_ok = max_ok && v >= -1e-12 && v <= n + 1 + 1e-12;
      const Box box{d, {}, n};
      const PotentialField pot = sample_potential(box, DistributionSpec::two_point(0.5, 0.0, 1.0), seed);
      const Environment ge = box_environment(box, ConductanceLaw{kElliptic2, seed});
      const KilledWalk walk(ge, box, pot);
      for (std::size_t k = 0; k < walk.unknown_count(); k += 7) green_ok = green_ok && walk.green_row(k)(k) >= 1.0;
    }

    const Environment te = torus_env(d, n, kElliptic2, 500 + d);
    const Environment be = box_env(d, n, kElliptic2, 600 + d);
    std::uniform_int_distribution<int> dir(0, d - 1);
    std::uniform_real_distribution<double> w(0.5, 2.0);
    for (int k = 0; k < 50; ++k, ++checks) {
      std::uniform_int_distribution<std::size_t> ts(0, te.lattice.site_count() - 1);
      const PerturbationReport r5 = single_edge_perturbation_check(te, {ts(gen), dir(gen)}, w(gen));
      corr_fail += !r5.holds;
      corr_ordered_fail += !r5.ordered_holds;
      corr_slack = std::min(corr_slack, r5.min_slack);

      Edge e8;
      do {
        std::uniform_int_distribution<std::size_t> bs(0, be.lattice.site_count() - 1);
        e8 = {bs(gen), dir(gen)};
      } while (!is_active_edge(be, e8));
      const PerturbationReport r8 = conductance_perturbation_check(be, e8, w(gen));
      cond_fail += !r8.holds;
      cond_ordered_fail += !r8.ordered_holds;
      cond_slack = std::min(cond_slack, r8.min_slack);

      Edge e10;
      for (;;) {
        std::uniform_int_distribution<std::size_t> bs(0, be.lattice.site_count() - 1);
        e10 = {bs(gen), dir(gen)};
        if (!be.has_edge(e10.site, e10.dir)) continue;
        Coord x = be.lattice.coords(e10.site), y = x;
        y[e10.dir] += 1;
        if (be.lattice.is_interior(x) || be.lattice.is_interior(y)) break;
      }
      std::uniform_real_distribution<double> up(be.weight(e10), 2.0);
      eig_fail += !eigen_perturbation_check(be, e10, up(gen)).holds;
    }
  }
  Outcome o;
  o.pass = gg_err <= 1e-10 && energy_ok && max_ok && green_ok && corr_fail == 0 && cond_fail == 0 && eig_fail == 0;
  o.detail = "GG rel " + fmt(gg_err) + ", energy bound " + (energy_ok ? "ok" : "violated") + ", max principle " +
             (max_ok ? "ok" : "violated") + ", G(x,x) >= 1 " + (green_ok ? "ok" : "violated") + ", perturbation failures " +
             std::to_string(corr_fail) + "/" + std::to_string(cond_fail) + "/" + std::to_string(eig_fail) +
             " of " + std::to_string(checks) + " each";
  o.data = {{"green_gauss_rel", gg_err},
            {"energy_bound", energy_ok},
            {"maximum_principle", max_ok},
            {"green_diagonal", green_ok},
            {"corrector_perturbation_failures", corr_fail},
            {"corrector_perturbation_min_slack", corr_slack},
            {"corrector_perturbation_ordered_failures", corr_ordered_fail},
            {"conductance_perturbation_failures", cond_fail},
            {"conductance_perturbation_min_slack", cond_slack},
            {"conductance_perturbation_ordered_failures", cond_ordered_fail},
            {"eigen_perturbation_failures", eig_fail},
            {"checks_per_statistic", checks}};
  return o;
}

SweepConfig sweep_config(Quantity q, int d, std::vector<int> ns, const DistributionSpec& dist, int m,
                         std::uint64_t seed) {
  SweepConfig c;
  c.run_id = "acceptance";
  c.quantity = q;
  c.d = d;
  c.n_list = std::move(ns);
  c.dist = dist;
  c.samples = m;
  c.master_seed = seed;
  c.direction.assign(d, 0);
  c.direction[0] = 1;
  return c;
}

// 5. variance upper bounds and rates, elliptic d = 3
Outcome variance_upper_bounds() {
  Outcome o;
  const SweepResult cond = run_sweep(sweep_config(Quantity::effective_conductance, 3, {4, 8, 16}, kTwoPoint, 200, 5),
                                     worker_count());
  const SweepAnalysis ca = analyse_sweep(cond);
  const BoundReport& b = ca.bounds.front();
  bool var_ok = cond.quality_ok();
  double worst_scaled = 0;
  for (const BoundVerdict& v : b.verdicts) {
    var_ok = var_ok && v.judged && v.pass;
    worst_scaled = std::max(worst_scaled, v.scaled);
  }
  const bool cslope = ca.fit && ca.fit->slope <= -(3 - 2) + 0.5;

  const SweepResult spec = run_sweep(sweep_config(Quantity::spectral_statistic, 3, {4, 8, 16}, kTwoPoint, 200, 6),
                                     worker_count());
  const SweepAnalysis sa = analyse_sweep(spec);
  const bool sslope = spec.quality_ok() && sa.fit && sa.fit->slope <= -0.5;

  o.pass = var_ok && cslope && sslope;
  o.detail = "max Var(f) N^(d-2) " + fmt(worst_scaled) + " vs 1536, conductance slope " +
             fmt(ca.fit ? ca.fit->slope : NAN) + " (<= -0.5), N^2 lambda slope " + fmt(sa.fit ? sa.fit->slope : NAN) +
             " (<= -0.5)";
  o.data = {{"conductance", sweep_summary(cond, ca)}, {"spectral", sweep_summary(spec, sa)}};
  return o;
}

// 6. tail bound non-violation, d = 3, N = 8
Outcome tail_guard() {
  SweepConfig c = sweep_config(Quantity::effective_conductance, 3, {8}, kTwoPoint, 500, 7);
  c.thresholds = {1, 2, 4, 8};
  const SweepResult r = run_sweep(c, worker_count());
  const SweepAnalysis a = analyse_sweep(r);
  const BoundReport& b = a.bounds.front();
  Outcome o;
  o.pass = r.quality_ok() && !b.tails.empty();
  std::string rows;
  for (const TailRow& t : b.tails.front().second) {
    o.pass = o.pass && t.judged && t.pass;
    rows += (rows.empty() ? "" : ", ") + std::string("t=") + fmt(t.t) + ": " + fmt(t.empirical) + " <= " + fmt(t.bound);
  }
  o.detail = "exceedance " + rows;
  o.data = sweep_summary(r, a);
  return o;
}

// 7. non-elliptic conductances
Outcome non_elliptic() {
  Outcome o;
  const auto law5 = DistributionSpec::power_low_tail(0.8, 1.0);
  const SweepResult r5 = run_sweep(sweep_config(Quantity::effective_conductance, 5, {3, 4, 6}, law5, 100, 8),
                                   worker_count());
  const BoundSpec b5 = bounds::effective_conductance_bounded(5, law5.upper_bound());
  bool ok5 = r5.quality_ok();
  std::string d5;
  for (const SweepLevel& l : r5.levels) {
    const BoundVerdict v = bound_check(l.stats, l.n, b5, 5, b5.kappa);
    ok5 = ok5 && v.judged && v.pass;
    d5 += (d5.empty() ? "" : ", ") + fmt(v.variance) + "<=" + fmt(v.bound);
  }

  const auto law3 = DistributionSpec::power_low_tail(0.6, 1.0);
  const SweepResult r3 = run_sweep(sweep_config(Quantity::effective_conductance, 3, {4, 8, 16}, law3, 100, 9),
                                   worker_count());
  const BoundSpec b3 = bounds::effective_conductance_tail(3, law3);
  bool ok3 = r3.quality_ok() && b3.applicable;
  std::string d3;
  for (const SweepLevel& l : r3.levels) {
    const BoundVerdict v = bound_check(l.stats, l.n, b3, 3, b3.kappa, b3.gamma);
    ok3 = ok3 && v.judged && v.pass;
    d3 += (d3.empty() ? "" : ", ") + fmt(v.variance) + "<=" + fmt(v.bound);
  }
  o.pass = ok5 && ok3;
  o.detail = "d=5 gamma=0.8: " + d5 + "; d=3 gamma=0.6 (D0=" + fmt(b3.d0) + "): " + d3;
  o.data = {{"d5", sweep_summary(r5, analyse_sweep(r5))}, {"d3", sweep_summary(r3, analyse_sweep(r3))}};
  return o;
}

// 8. variance lower bound for the killed walk
Outcome killed_walk_lower_bound() {
  Outcome o;
  std::string detail;
  json levels = json::array();
  for (int n : {2, 4, 8}) {
    VarianceExperimentConfig cfg;
    cfg.d = 2;
    cfg.direction = Coord{1, 0};
    cfg.n = n;
    cfg.samples = 400;
    cfg.potential = DistributionSpec::two_point(0.5, 0.0, std::numbers::e - 1.0);  // theta in {0, 1}
    cfg.master_seed = 10;
    const VarianceExperimentReport r = variance_lower_bound_experiment(cfg);
    const bool ok = r.pass && r.max_decomposition_gap <= 1e-8 && std::abs(r.var_theta - 0.25) < 1e-12;
    o.pass = o.pass && ok;
    detail += (detail.empty() ? "" : ", ") + std::string("N=") + std::to_string(n) + ": " + fmt(r.variance) +
              " >= " + fmt(r.bound) + " (gap " + fmt(r.max_decomposition_gap) + ")";
    levels.push_back({{"N", n},
                      {"variance", r.variance},
                      {"stderr", r.stderr_variance},
                      {"bound", r.bound},
                      {"max_decomposition_gap", r.max_decomposition_gap},
                      {"max_literal_gap", r.max_literal_gap},
                      {"fkg_covariance", r.fkg_covariance},
                      {"max_truncation_gap", r.max_truncation_gap},
                      {"unconverged", r.unconverged}});
  }
  o.detail = detail;
  o.data = levels;
  return o;
}

// 9. determinism across thread counts
Outcome determinism() {
  Outcome o;
  int compared = 0;
  for (const SweepConfig& c : {sweep_config(Quantity::effective_conductance, 3, {4, 6, 8}, kTwoPoint, 40, 11),
                               sweep_config(Quantity::spectral_statistic, 2, {4, 8}, kElliptic2, 20, 12),
                               sweep_config(Quantity::diffusion_entry, 2, {4, 8}, kTwoPoint, 20, 13),
                               sweep_config(Quantity::potential_statistic, 2, {2, 4}, DistributionSpec::constant(1), 20, 14)}) {
    const SweepResult a = run_sweep(c, 1), b = run_sweep(c, 8), again = run_sweep(c, 1);
    const bool same = sweep_csv(a) == sweep_csv(b) && sweep_csv(a) == sweep_csv(again) &&
                      sweep_summary(a, analyse_sweep(a)).dump() == sweep_summary(b, analyse_sweep(b)).dump();
    o.pass = o.pass && same;
    ++compared;
  }
  o.detail = std::to_string(compared) + " sweeps, CSV and summary JSON at 1 and 8 threads " +
             (o.pass ? "byte-identical" : "differ");
  return o;
}

// 10. periodized diffusion matrices settle as N doubles
Outcome convergence_trend() {
  const std::vector<int> ns{4, 8, 16, 32};
  std::vector<double> mean_diff(ns.size() - 1, 0.0);
  const int seeds = 50;
  for (int s = 0; s < seeds; ++s) {
    std::vector<Eigen::MatrixXd> dm;
    for (int n : ns) {
      const Environment env = torus_env(2, n, kTwoPoint, 3000 + s);
      dm.push_back(diffusion_matrix(env, solve_corrector(env)));
    }
    for (std::size_t k = 0; k + 1 < ns.size(); ++k) mean_diff[k] += (dm[k + 1] - dm[k]).norm() / seeds;
  }
  Outcome o;
  for (std::size_t k = 0; k + 1 < mean_diff.size(); ++k) o.pass = o.pass && mean_diff[k + 1] < mean_diff[k];
  o.detail = "mean ||D_2N - D_N||_F at N=4,8,16: " + fmt(mean_diff[0]) + ", " + fmt(mean_diff[1]) + ", " + fmt(mean_diff[2]);
  o.data = {{"N", std::vector<int>(ns.begin(), ns.end() - 1)}, {"mean_difference", mean_diff}};
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"exact closed forms", closed_forms},
      {"d=1 oracles", one_dimensional},
      {"dense-oracle equivalence", dense_equivalence},
      {"exact inequalities", exact_inequalities},
      {"variance upper bounds", variance_upper_bounds},
      {"tail non-violation", tail_guard},
      {"non-elliptic regime", non_elliptic},
      {"killed-walk variance lower bound", killed_walk_lower_bound},
      {"determinism", determinism},
      {"convergence trend", convergence_trend}};

  std::set<int> wanted;
  std::string report_path;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--report" && i + 1 < argc) {
      report_path = argv[++i];
    } else {
      wanted.insert(std::stoi(a));
    }
  }

  json report = json::object();
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!wanted.empty() && !wanted.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = seconds_since(t0);
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << " (" << criteria[k].first << "): " << o.detail
              << "  [" << fmt(secs) << " s]" << std::endl;
    report[std::to_string(id)] = {
        {"name", criteria[k].first}, {"pass", o.pass}, {"detail", o.detail}, {"seconds", secs}, {"data", o.data}};
  }
  if (!report_path.empty()) write_text_file(report_path, report.dump(2) + "\n");
  return failures == 0 ? 0 : 1;
}
