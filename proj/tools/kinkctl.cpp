// kinkctl: command-line driver for the kink-cluster experiments.
//
//   kinkctl <kink|forces|toda|evolve|cluster|verify|sweep> [--config FILE]
//           [--model ID] [--set section.key=value]... [--csv PATH] [--json PATH]
//
// Every subcommand prints (or writes) a JSON summary with the config echo, one
// entry per check and the wall time.  Exit code 0 iff all checks pass, 1 if a
// check fails, 2 on errors.

#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "kinkclusters/config.hpp"
#include "kinkclusters/experiments.hpp"

namespace kc = kinkclusters;
using nlohmann::json;

namespace {

struct Check {
  std::string name;
  double value = 0.0;
  double limit = 0.0;
  std::string relation;  // "<=", ">=", "in"
  bool pass = false;
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

struct Outcome {
  std::vector<Check> checks;
  json details = json::object();
  Table table;

  void at_most(const std::string& name, double value, double limit) {
    checks.push_back({name, value, limit, "<=", value <= limit});
  }
  void at_least(const std::string& name, double value, double limit) {
    checks.push_back({name, value, limit, ">=", value >= limit});
  }
  void holds(const std::string& name, bool ok) {
    checks.push_back({name, ok ? 1.0 : 0.0, 1.0, "==", ok});
  }
};

void write_csv(const Table& t, std::ostream& out) {
  out << std::setprecision(17);
  for (std::size_t i = 0; i < t.header.size(); ++i) out << (i ? "," : "") << t.header[i];
  out << "\n";
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
    out << "\n";
  }
}

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json ptree_to_json(const boost::property_tree::ptree& t) {
  if (t.empty()) return t.data();
  json j = json::object();
  for (const auto& [k, v] : t) j[k] = ptree_to_json(v);
  return j;
}

kc::RunOptions run_options(const kc::ExperimentConfig& c) {
  kc::RunOptions o;
  o.dx = c.dx;
  o.courant = c.courant;
  o.sample_interval = c.sample_interval;
  o.quasi_static = c.quasi_static;
  return o;
}

void append_series(Table& t, const kc::ModulationSeries& s, const std::vector<double>* energy) {
  t.header = s.header();
  if (energy) t.header.insert(t.header.begin() + 1, "energy");
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto r = s.row(i);
    if (energy) r.insert(r.begin() + 1, (*energy)[i]);
    t.rows.push_back(r);
  }
}

// ---- subcommands ------------------------------------------------------------

Outcome run_kink(const kc::ExperimentConfig& c, const std::string& dump) {
  Outcome o;
  const kc::Potential pot = c.potential();
  const kc::ValidationReport vr = kc::validate(pot);
  for (const auto& chk : vr.checks) o.holds("potential." + chk.name, chk.pass);
  const kc::KinkProfile prof = kc::build_profile(pot, c.x_max, c.n_points);
  const kc::IdentityReport id = kc::check_identities(prof);
  o.details["kappa"] = prof.kappa;
  o.details["mass"] = prof.mass;
  o.details["reduced_force"] = id.reduced_force;
  o.details["asymptotic_slope"] = id.asymptotic_slope;
  o.details["kappa_tail_fit"] = id.kappa_tail_fit;
  o.at_most("reduced_force_error", std::abs(id.reduced_force - id.reduced_force_target), 1e-6);
  o.at_most("asymptotic_slope", id.asymptotic_slope, -2.9);
  o.at_most("kappa_tail_fit_error", std::abs(id.kappa_tail_fit - prof.kappa), 1e-4);
  o.at_most("zero_mode_residual", id.zero_mode_residual, prof.dx * prof.dx);
  if (!dump.empty()) {
    o.table.header = {"x", "H", "dH", "d2H"};
    for (std::size_t i = 0; i < prof.x.size(); ++i) {
      o.table.rows.push_back({prof.x[i], prof.h[i], prof.dh[i], prof.d2H(prof.x[i])});
    }
  }
  return o;
}

Outcome run_forces(const kc::ExperimentConfig& c) {
  Outcome o;
  const kc::KinkProfile prof = kc::build_profile(c.potential(), c.x_max, c.n_points);
  o.table.header = {"y", "force", "force_asymptotic", "relative_error", "third_law",
                    "energy", "energy_expansion", "energy_remainder"};
  for (double y : c.force_gaps) {
    const kc::MultikinkConfig cfg({-y / 2, y / 2}, {-c.force_velocity, c.force_velocity});
    const double f1 = kc::interaction_force(prof, cfg, 1);
    const double f2 = kc::interaction_force(prof, cfg, 2);
    const double fa = kc::force_asymptotic(prof.kappa, cfg, 1);
    const double rel = std::abs(f1 - fa) / std::abs(fa);
    const kc::Grid g = kc::Grid::with_spacing(-y / 2 - 40, y / 2 + 40, 0.005);
    const double e = kc::total_energy(prof.potential, kc::synthesize(prof, cfg, g)).value;
    const double ee = kc::energy_expansion(prof.kappa, prof.mass, cfg);
    o.table.rows.push_back({y, f1, fa, rel, f1 + f2, e, ee, e - ee});
    const std::string tag = "y=" + std::to_string(y).substr(0, std::to_string(y).find('.') + 2);
    o.at_most("third_law " + tag, std::abs(f1 + f2), 1e-12);
    if (c.force_velocity == 0.0 && y >= 14) o.at_most("force_law " + tag, rel, 1e-3);
    else if (c.force_velocity == 0.0 && y >= 10) o.at_most("force_law " + tag, rel, 1e-2);
  }
  return o;
}

Outcome run_toda(const kc::ExperimentConfig& c) {
  Outcome o;
  const kc::KinkProfile prof = kc::build_profile(c.potential(), c.x_max, c.n_points);
  const double M = prof.mass, K = prof.kappa;
  const std::size_t n = c.n;
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  kc::TodaOptions opt;
  for (double t = c.toda_t0 * std::pow(10.0, 0.05); t < c.toda_t_final; t *= std::pow(10.0, 0.05)) {
    opt.output_times.push_back(t);
  }
  opt.output_times.push_back(c.toda_t_final);

  o.table.header = {"trial", "t"};
  for (std::size_t k = 1; k <= n; ++k) o.table.header.push_back("a_" + std::to_string(k));
  for (std::size_t k = 1; k <= n; ++k) o.table.header.push_back("p_" + std::to_string(k));
  for (std::size_t k = 1; k < n; ++k) o.table.header.push_back("dy_" + std::to_string(k));

  const std::size_t trials = std::max<std::size_t>(1, c.toda_trials);
  double worst_dev = 0, worst_e = 0, worst_p = 0;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    kc::TodaState s;
    if (c.toda_trials == 0) {
      s = kc::explicit_parabolic(n, M, K, c.toda_t0);
    } else {
      std::vector<double> delta(n);
      double amax = 0;
      for (double& d : delta) {
        d = unit(rng);
        amax = std::max(amax, std::abs(d));
      }
      for (double& d : delta) d *= c.toda_delta / amax;
      s = kc::parabolic_perturbation(n, M, K, c.toda_t0, delta, c.toda_t_far);
    }
    const double e0 = kc::toda_energy(s), p0 = kc::toda_momentum(s);
    const auto traj = kc::integrate(s, c.toda_t_final, opt);
    for (const auto& x : traj) {
      auto [yp, vp] = kc::asymptotic_law(n, M, K, x.time);
      std::vector<double> row{double(trial), x.time};
      row.insert(row.end(), x.a.begin(), x.a.end());
      row.insert(row.end(), x.p.begin(), x.p.end());
      const auto y = x.gaps();
      for (std::size_t k = 0; k + 1 < n; ++k) row.push_back(y[k] - yp[k]);
      o.table.rows.push_back(row);
      worst_e = std::max(worst_e, std::abs(kc::toda_energy(x) - e0));
      worst_p = std::max(worst_p, std::abs(kc::toda_momentum(x) - p0));
    }
    auto [yp, vp] = kc::asymptotic_law(n, M, K, traj.back().time);
    const auto y = traj.back().gaps();
    for (std::size_t k = 0; k + 1 < n; ++k) worst_dev = std::max(worst_dev, std::abs(y[k] - yp[k]));
  }
  o.at_most("energy_conservation", worst_e, 1e-8);
  o.at_most("momentum_conservation", worst_p, 1e-10);
  if (n >= 2) o.at_most("law_deviation_at_t_final", worst_dev, 0.05);
  o.details["trials"] = trials;
  return o;
}

Outcome run_evolve(const kc::ExperimentConfig& c) {
  Outcome o;
  const kc::KinkProfile prof = kc::build_profile(c.potential(), c.x_max, c.n_points);
  const std::size_t n = c.evolve_gaps.size() + 1;
  std::vector<double> v = c.evolve_velocities;
  if (v.empty()) v.assign(n, 0.0);
  if (v.size() != n) throw kc::ConfigError("evolve.velocities needs one entry per kink");
  const kc::MultikinkConfig cfg(kc::centered_positions(c.evolve_gaps), v);
  const kc::Grid grid = c.half_width > 0
                            ? kc::Grid::with_spacing(-c.half_width, c.half_width, c.dx)
                            : kc::grid_for(cfg, c.evolve_t_final, c.dx);
  const double safe = kc::safe_window(grid, cfg);
  if (c.evolve_t_final > safe) throw kc::PreconditionError("t_final exceeds the safe window");
  const kc::FieldState s = kc::prepare_state(prof, cfg, grid, c.quasi_static);
  kc::ModulationTracker tracker(prof, n, 0.0, true);
  tracker.seed(cfg);
  const kc::RunOptions ro = run_options(c);
  const kc::RunRecord rec =
      kc::evolve(prof.potential, s, c.evolve_t_final, ro.dt(), ro.sample_interval,
                 tracker.observer());
  append_series(o.table, tracker.series(), &rec.energies);
  double drift = 0;
  for (double e : rec.energies) drift = std::max(drift, std::abs(e - rec.energies.front()));
  o.at_most("relative_energy_drift", drift / std::abs(rec.energies.front()), 1e-7);
  o.details["safe_window"] = safe;
  return o;
}

Outcome run_cluster(const kc::ExperimentConfig& c) {
  Outcome o;
  const kc::KinkProfile prof = kc::build_profile(c.potential(), c.x_max, c.n_points);
  kc::ShootingOptions so;
  so.run = run_options(c);
  so.budget = c.budget;
  so.tol_map = c.tol_map;
  const kc::ShootingProblem prob(c.cluster_y0, c.horizon);
  const kc::ClusterResult r = kc::construct_cluster(prof, prob, so);
  const auto y0 = r.fitted_gaps_0();
  double err = 0;
  for (std::size_t k = 0; k < y0.size(); ++k) err = std::max(err, std::abs(y0[k] - prob.y0[k]));
  o.at_most("fitted_gap_error_at_0", err, 0.05);
  o.at_most("envelope_max_ratio", r.envelope_max_ratio, 10.0);
  o.at_least("envelope_min_ratio", r.envelope_min_ratio, 0.1);
  o.details["y_T"] = r.y_T;
  o.details["fitted_gaps_0"] = y0;
  o.details["evaluations"] = r.evaluations;
  o.details["T1"] = r.record.T1;
  o.details["lambda"] = r.record.boost.lambda;
  json hist = json::array();
  for (const auto& [y, psi] : r.history) hist.push_back({{"y_T", y}, {"psi", psi}});
  o.details["history"] = hist;
  append_series(o.table, r.record.series, nullptr);
  return o;
}

struct LaunchSummary {
  kc::LaunchResult launch;
  kc::VerificationReport report;
  double max_mv = 0, max_dp = 0;
};

LaunchSummary launch_and_verify(const kc::KinkProfile& prof, const kc::ExperimentConfig& c,
                                double gap) {
  LaunchSummary s;
  const double tl =
      c.t_launch > 0 ? c.t_launch : kc::parabolic_time_for_gap(c.n, prof.mass, prof.kappa, gap);
  kc::LaunchOptions lo;
  lo.run = run_options(c);
  lo.t_run = c.t_run;
  lo.half_width = c.half_width;
  lo.reverse = c.reverse;
  if (lo.t_run <= 0 && lo.half_width <= 0) lo.t_run = 3.1 * tl;  // time ratio >= 4
  s.launch = kc::launch_parabolic(prof, c.n, tl, lo);
  s.report = kc::verify_asymptotics(s.launch.series, prof.mass, prof.kappa);
  const auto& se = s.launch.series;
  for (std::size_t i = 0; i < se.size(); ++i) {
    for (std::size_t k = 0; k < se.n; ++k) {
      s.max_mv = std::max(s.max_mv, se.mv_minus_p[i][k]);
      if (std::isfinite(se.dp_minus_force[i][k])) s.max_dp = std::max(s.max_dp, se.dp_minus_force[i][k]);
    }
  }
  return s;
}

void report_launch(Outcome& o, const LaunchSummary& s, const std::string& prefix) {
  const auto& r = s.report;
  o.holds(prefix + "monotone_gaps", !r.non_monotone);
  o.at_most(prefix + "gap_law_deviation", r.gap_deviation, r.gap_tol);
  o.at_most(prefix + "velocity_law_deviation", r.velocity_deviation, r.velocity_tol);
  o.at_most(prefix + "tg_trend_slope", r.tg_slope, 0.0);
  o.at_most(prefix + "mv_minus_p_over_rho", s.max_mv, 10.0);
  o.at_most(prefix + "dp_minus_force_scaled", s.max_dp, 20.0);
}

Outcome run_verify(const kc::ExperimentConfig& c) {
  Outcome o;
  const kc::KinkProfile prof = kc::build_profile(c.potential(), c.x_max, c.n_points);
  const LaunchSummary s = launch_and_verify(prof, c, c.launch_gap);
  report_launch(o, s, "");
  const auto& r = s.report;
  o.details["t_launch"] = s.launch.t_launch;
  o.details["t_star"] = r.t_star;
  o.details["window"] = {r.t_min, r.t_max};
  o.details["tg_max"] = r.tg_max;
  append_series(o.table, s.launch.series, &s.launch.run.energies);
  return o;
}

Outcome run_sweep(const kc::ExperimentConfig& c) {
  Outcome o;
  const kc::KinkProfile prof = kc::build_profile(c.potential(), c.x_max, c.n_points);
  if (c.sweep_target == "toda") {
    // one trial per seed, seeds seed .. seed + trials - 1
    o.table.header = {"seed", "max_law_deviation", "energy_error", "momentum_error"};
    for (std::size_t i = 0; i < std::max<std::size_t>(1, c.toda_trials); ++i) {
      kc::ExperimentConfig ci = c;
      ci.seed = c.seed + i;
      ci.toda_trials = 1;
      Outcome oi = run_toda(ci);
      double dev = 0, e = 0, p = 0;
      for (const auto& chk : oi.checks) {
        if (chk.name == "law_deviation_at_t_final") dev = chk.value;
        if (chk.name == "energy_conservation") e = chk.value;
        if (chk.name == "momentum_conservation") p = chk.value;
      }
      o.table.rows.push_back({double(ci.seed), dev, e, p});
      for (auto chk : oi.checks) {
        chk.name = "seed=" + std::to_string(ci.seed) + " " + chk.name;
        o.checks.push_back(chk);
      }
    }
    return o;
  }
  std::vector<std::future<LaunchSummary>> jobs;
  for (double gap : c.sweep_gaps) {
    jobs.push_back(std::async(std::launch::async,
                              [&prof, &c, gap] { return launch_and_verify(prof, c, gap); }));
  }
  o.table.header = {"gap", "t_launch", "t_star", "gap_deviation", "velocity_deviation",
                    "tg_slope", "max_mv_minus_p", "max_dp_minus_force"};
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const LaunchSummary s = jobs[i].get();
    const auto& r = s.report;
    o.table.rows.push_back({c.sweep_gaps[i], s.launch.t_launch, r.t_star, r.gap_deviation,
                            r.velocity_deviation, r.tg_slope, s.max_mv, s.max_dp});
    report_launch(o, s, "gap=" + std::to_string(c.sweep_gaps[i]).substr(0, 5) + " ");
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kink-cluster experiments for scalar field models on the line"};
  app.require_subcommand(1);
  std::string config_path, model, csv, json_path, dump;
  std::vector<std::string> sets;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"kink", "Build and check the static kink profile"},
      {"forces", "Interaction forces and energy expansion against the asymptotic law"},
      {"toda", "Integrate the reduced Toda system (seeded escape perturbations)"},
      {"evolve", "Evolve a multikink configuration with the field solver"},
      {"cluster", "Construct a cluster with prescribed initial gaps by backward shooting"},
      {"verify", "Launch a near-parabolic cluster and verify the asymptotic law"},
      {"sweep", "Repeat toda trials over seeds or verify runs over initial gaps"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config_path, "INI config file");
    sub->add_option("-m,--model", model, "phi4, sine_gordon or table:<path>");
    sub->add_option("-s,--set", sets, "Override a config key: section.key=value");
    sub->add_option("--csv", csv, "CSV output path ('-' for stdout)");
    sub->add_option("--json", json_path, "JSON summary path (default stdout)");
    if (name == "kink") sub->add_option("--dump", dump, "Write the profile table to this CSV");
  }
  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  const auto start = std::chrono::steady_clock::now();
  json summary;
  summary["command"] = command;
  int code = 0;
  try {
    kc::ExperimentConfig cfg = config_path.empty() ? kc::ExperimentConfig{}
                                                   : kc::load_config(config_path);
    kc::apply_setting(cfg, "experiment.kind", command);
    if (!model.empty()) kc::apply_setting(cfg, "experiment.model", model);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw kc::ConfigError("--set needs section.key=value: " + s);
      kc::apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    if (!csv.empty()) cfg.csv = csv == "-" ? "" : csv;
    if (!json_path.empty()) cfg.json = json_path;
    if (!dump.empty()) cfg.csv = dump;
    cfg.validate();
    summary["config"] = ptree_to_json(cfg.raw);

    Outcome out;
    if (command == "kink") out = run_kink(cfg, dump);
    else if (command == "forces") out = run_forces(cfg);
    else if (command == "toda") out = run_toda(cfg);
    else if (command == "evolve") out = run_evolve(cfg);
    else if (command == "cluster") out = run_cluster(cfg);
    else if (command == "verify") out = run_verify(cfg);
    else out = run_sweep(cfg);

    bool all = true;
    json checks = json::array();
    for (const auto& c : out.checks) {
      checks.push_back({{"name", c.name},
                        {"value", finite_or_null(c.value)},
                        {"relation", c.relation},
                        {"limit", c.limit},
                        {"pass", c.pass}});
      all = all && c.pass;
    }
    summary["checks"] = checks;
    summary["details"] = out.details;
    summary["pass"] = all;
    code = all ? 0 : 1;

    if (!out.table.header.empty()) {
      if (!cfg.csv.empty()) {
        std::ofstream f(cfg.csv, std::ios::trunc);
        write_csv(out.table, f);
      } else if (csv == "-") {
        write_csv(out.table, std::cout);
      }
    }
    summary["wall_time_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!cfg.json.empty()) {
      std::ofstream(cfg.json, std::ios::trunc) << summary.dump(2) << "\n";
    } else {
      std::cout << summary.dump(2) << "\n";
    }
  } catch (const std::exception& e) {
    summary["error"] = e.what();
    summary["pass"] = false;
    summary["wall_time_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cerr << "kinkctl: " << e.what() << "\n";
    std::cout << summary.dump(2) << "\n";
    code = 2;
  }
  return code;
}
