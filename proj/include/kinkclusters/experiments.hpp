#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <boost/math/tools/minima.hpp>

#include "kinkclusters/field_solver.hpp"
#include "kinkclusters/modulation.hpp"
#include "kinkclusters/nbody.hpp"

namespace kinkclusters {

// ---- initial data ---------------------------------------------------------

struct QuasiStatic {
  std::vector<double> g;      // field correction on the grid (zero on the boundary)
  std::vector<double> accel;  // Lagrange multipliers, i.e. the kink accelerations
};

// First-order correction g to the superposition H(a, v) such that the field
// starts with g_tt ~ 0: solves
//   (-D + U''(H)) g = D H - U'(H) - H_tt|_{v const} - sum_k c_k dH/da_k,
//   <g, dH/da_k> = 0,
// with D the solver's discrete Laplacian.  Launching from H(a, v) alone
// excites the internal mode of the kinks with an amplitude of the order of the
// interaction, which then never decays on desk-scale windows.
inline QuasiStatic quasi_static_correction(const KinkProfile& prof, const MultikinkConfig& cfg,
                                           const Grid& grid) {
  const Potential& pot = prof.potential;
  const FieldState s = synthesize(prof, cfg, grid);
  const std::size_t N = grid.nodes(), n = cfg.n(), m = N - 2;
  const double dx = grid.dx();
  std::vector<double> acc(N);
  detail::acceleration(pot, s.phi, dx, acc);

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(Eigen::Index(m + n));
  std::vector<std::vector<double>> w(n, std::vector<double>(N, 0.0));
  for (std::size_t i = 1; i + 1 < N; ++i) {
    const double x = grid.x(i);
    double phitt = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double gm = lorentz_gamma(cfg.v[k]), sg = kink_sign(k + 1);
      const double z = gm * (x - cfg.a[k]);
      phitt += sg * gm * gm * cfg.v[k] * cfg.v[k] * prof.d2H(z);
      w[k][i] = -sg * gm * prof.dH(z);
    }
    rhs[Eigen::Index(i - 1)] = acc[i] - phitt;
  }

  std::vector<Eigen::Triplet<double>> tr;
  tr.reserve(m * (6 + 2 * n));
  const double c2 = 1.0 / (dx * dx), c4 = 1.0 / (12.0 * dx * dx);
  for (std::size_t i = 1; i + 1 < N; ++i) {
    const auto r = Eigen::Index(i - 1);
    auto put = [&](std::size_t j, double v) {
      if (j >= 1 && j + 1 < N) tr.emplace_back(r, Eigen::Index(j - 1), v);
    };
    if (i == 1 || i == N - 2) {
      put(i - 1, -c2);
      put(i, 2 * c2);
      put(i + 1, -c2);
    } else {
      put(i - 2, c4);
      put(i - 1, -16 * c4);
      put(i, 30 * c4);
      put(i + 1, -16 * c4);
      put(i + 2, c4);
    }
    tr.emplace_back(r, r, pot.d2u(s.phi[i]));
    for (std::size_t k = 0; k < n; ++k) {
      tr.emplace_back(r, Eigen::Index(m + k), w[k][i]);
      tr.emplace_back(Eigen::Index(m + k), r, w[k][i] * dx);
    }
  }
  Eigen::SparseMatrix<double> A(Eigen::Index(m + n), Eigen::Index(m + n));
  A.setFromTriplets(tr.begin(), tr.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(A);
  if (lu.info() != Eigen::Success) throw ConsistencyError("quasi-static system is singular");
  const Eigen::VectorXd sol = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !sol.allFinite()) {
    throw ConsistencyError("quasi-static solve failed");
  }

  QuasiStatic q;
  q.g.assign(N, 0.0);
  for (std::size_t i = 1; i + 1 < N; ++i) q.g[i] = sol[Eigen::Index(i - 1)];
  for (std::size_t k = 0; k < n; ++k) q.accel.push_back(sol[Eigen::Index(m + k)]);
  return q;
}

// H(a, v) on the grid, optionally with the quasi-static correction.  The
// correction is transported with the kinks: its time derivative is taken by a
// centered difference in the kink positions over one time unit.
inline FieldState prepare_state(const KinkProfile& prof, const MultikinkConfig& cfg,
                                const Grid& grid, bool quasi_static) {
  FieldState s = synthesize(prof, cfg, grid);
  if (!quasi_static || cfg.n() == 0) return s;
  const QuasiStatic q = quasi_static_correction(prof, cfg, grid);
  MultikinkConfig fwd = cfg, bwd = cfg;
  for (std::size_t k = 0; k < cfg.n(); ++k) {
    fwd.a[k] += cfg.v[k];
    bwd.a[k] -= cfg.v[k];
  }
  const QuasiStatic qf = quasi_static_correction(prof, fwd, grid);
  const QuasiStatic qb = quasi_static_correction(prof, bwd, grid);
  for (std::size_t i = 0; i < s.phi.size(); ++i) {
    s.phi[i] += q.g[i];
    s.phidot[i] += 0.5 * (qf.g[i] - qb.g[i]);
  }
  return s;
}

struct RunOptions {
  double dx = 0.05;
  double courant = 0.8;  // dt = courant * dx
  double sample_interval = 0.2;
  bool quasi_static = true;

  double dt() const { return courant * dx; }
};

// Grid symmetric about the barycenter of cfg, wide enough that a run of
// length `horizon` stays inside the safe window.
inline Grid grid_for(const MultikinkConfig& cfg, double horizon, double dx) {
  const double mid = cfg.n() ? 0.5 * (cfg.a.front() + cfg.a.back()) : 0.0;
  const double half = cfg.n() ? 0.5 * (cfg.a.back() - cfg.a.front()) : 0.0;
  const double w = half + horizon + 10.0;
  return Grid::with_spacing(mid - w, mid + w, dx);
}

// ---- boost selection ------------------------------------------------------

inline double position_proximity(const MultikinkConfig& cfg) {
  double r = 0.0;
  for (double y : cfg.gaps()) r += std::exp(-y);
  return r;
}

inline std::vector<double> boost_velocities(std::size_t n, double lambda, double rho) {
  std::vector<double> v(n);
  for (std::size_t k = 1; k <= n; ++k) {
    v[k - 1] = (2.0 * double(k) - double(n) - 1.0) / 2.0 * lambda * std::sqrt(rho);
  }
  return v;
}

struct BoostResult {
  double lambda = 0.0;
  MultikinkConfig config;
  double energy_error = 0.0;  // total energy - n M
};

// Outgoing velocities with equal spacing and zero sum whose total energy is
// exactly n M, so that the cluster sits on the zero-energy (parabolic) shell.
inline BoostResult choose_boost(const KinkProfile& prof, const std::vector<double>& a_T,
                                double aux_dx = 0.005) {
  const std::size_t n = a_T.size();
  MultikinkConfig base(a_T, {});
  const double rho = position_proximity(base);
  if (n < 2) throw PreconditionError("choose_boost needs n >= 2");
  if (!(rho <= 1e-2)) throw PreconditionError("choose_boost needs rho(a_T) <= 1e-2");
  const Grid aux = Grid::with_spacing(a_T.front() - 40.0, a_T.back() + 40.0, aux_dx);
  const double target = double(n) * prof.mass;
  auto excess = [&](double lam) {
    const MultikinkConfig c(a_T, boost_velocities(n, lam, rho));
    return total_energy(prof.potential, synthesize(prof, c, aux)).value - target;
  };

  double lo = 0.1, hi = 10.0;
  double flo = excess(lo), fhi = excess(hi);
  for (int widen = 0; widen < 8 && flo * fhi > 0; ++widen) {
    lo *= 0.5;
    if (hi * 2 * (double(n) - 1) / 2 * std::sqrt(rho) < 0.9) hi *= 2.0;
    flo = excess(lo);
    fhi = excess(hi);
  }
  if (flo * fhi > 0) throw BoostSelectionError("no sign change of E - nM in the lambda bracket");

  double mid = 0.5 * (lo + hi), fmid = excess(mid);
  for (int it = 0; it < 100 && std::abs(fmid) > 1e-10 && hi - lo > 1e-13; ++it) {
    if ((fmid < 0) == (flo < 0)) {
      lo = mid;
      flo = fmid;
    } else {
      hi = mid;
    }
    mid = 0.5 * (lo + hi);
    fmid = excess(mid);
  }
  if (std::abs(fmid) > 1e-8) throw BoostSelectionError("energy matching did not reach 1e-8");
  BoostResult r;
  r.lambda = mid;
  r.config = MultikinkConfig(a_T, boost_velocities(n, mid, rho));
  r.energy_error = fmid;
  return r;
}

// ---- shooting -------------------------------------------------------------

struct ShootingProblem {
  std::vector<double> y0;  // target gaps at t = 0
  double T = 40.0;
  double L1 = 0.0, L2 = 0.0;

  ShootingProblem() = default;
  ShootingProblem(std::vector<double> gaps, double horizon)
      : y0(std::move(gaps)), T(horizon) {
    if (y0.empty()) throw PreconditionError("shooting needs at least one gap");
    L1 = *std::min_element(y0.begin(), y0.end()) - 2.0;
    L2 = *std::max_element(y0.begin(), y0.end()) + 6.0;
    check();
  }

  std::size_t n() const { return y0.size() + 1; }
  double threshold() const { return 2.0 * double(n()) * std::exp(-L1); }

  void check() const {
    if (!(L2 > L1 && L1 > 0)) throw PreconditionError("need L2 > L1 > 0");
    if (!(T > 0)) throw PreconditionError("need T > 0");
  }
};

inline std::vector<double> centered_positions(const std::vector<double>& gaps) {
  std::vector<double> a(gaps.size() + 1, 0.0);
  for (std::size_t k = 0; k < gaps.size(); ++k) a[k + 1] = a[k] + gaps[k];
  const double mid = 0.5 * (a.front() + a.back());
  for (double& x : a) x -= mid;
  return a;
}

struct ExitRecord {
  std::vector<double> y_T;
  BoostResult boost;
  std::vector<double> psi;  // fitted gaps at T1
  double T1 = 0.0;
  bool crossed = false;
  RunRecord run;                 // backward run, sample times are T - t
  ModulationSeries series;       // same samples, physical times
  FieldState state_T;            // the prepared data at time T
  FieldState state_0;            // physical state at t = 0
  MultikinkConfig config_0;      // fitted parameters at t = 0 (physical velocities)
};

// Psi(y_T): prepare H(a_T, v_T) at time T, run backwards to t = 0 and return
// the fitted gaps at the last time T1 at which the proximity still exceeds the
// exit threshold (or at t = 0 if it never does).
inline ExitRecord exit_time_map(const KinkProfile& prof, const ShootingProblem& prob,
                                const std::vector<double>& y_T, const RunOptions& opt = {}) {
  if (y_T.size() != prob.y0.size()) throw PreconditionError("y_T has the wrong size");
  ExitRecord rec;
  rec.y_T = y_T;
  rec.boost = choose_boost(prof, centered_positions(y_T));
  const MultikinkConfig& cfg = rec.boost.config;
  const Grid grid = grid_for(cfg, prob.T, opt.dx);
  if (safe_window(grid, cfg) < prob.T) throw PreconditionError("safe window shorter than T");

  rec.state_T = prepare_state(prof, cfg, grid, opt.quasi_static);
  FieldState rev = time_reverse(rec.state_T);
  rev.time = 0.0;
  MultikinkConfig seed = cfg;
  for (double& v : seed.v) v = -v;

  const std::size_t n = cfg.n();
  ModulationTracker tracker(prof, n, 0.0, false);
  tracker.seed(seed);
  try {
    rec.run = evolve(prof.potential, rev, prob.T, opt.dt(), opt.sample_interval,
                     tracker.observer());
  } catch (const FitDivergence& e) {
    throw MapEvaluationError(std::string("fit diverged during the backward run: ") + e.what());
  } catch (const BlowUpDetected& e) {
    throw MapEvaluationError(std::string("backward run blew up: ") + e.what());
  }

  // Back to physical orientation: t = T - tau, v -> -v.
  ModulationSeries s = tracker.series();
  for (std::size_t i = 0; i < s.size(); ++i) {
    s.t[i] = prob.T - s.t[i];
    for (double& v : s.v[i]) v = -v;
  }
  rec.series = s;
  rec.state_0 = time_reverse(rec.run.final_state);
  rec.state_0.time = 0.0;
  rec.config_0 = MultikinkConfig(s.a.back(), s.v.back());

  auto gaps_at = [&](std::size_t i) { return MultikinkConfig(s.a[i], s.v[i]).gaps(); };
  auto prox = [&](std::size_t i) { return proximity(MultikinkConfig(s.a[i], s.v[i])); };
  const double thr = prob.threshold();
  rec.psi = gaps_at(s.size() - 1);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double r = prox(i);
    if (r < thr) continue;
    rec.crossed = true;
    if (i == 0) {
      rec.T1 = s.t[0];
      rec.psi = gaps_at(0);
    } else {
      const double r0 = prox(i - 1);
      const double w = (thr - r0) / (r - r0);
      rec.T1 = s.t[i - 1] + w * (s.t[i] - s.t[i - 1]);
      const auto g0 = gaps_at(i - 1), g1 = gaps_at(i);
      for (std::size_t k = 0; k < g0.size(); ++k) rec.psi[k] = g0[k] + w * (g1[k] - g0[k]);
    }
    break;
  }
  return rec;
}

struct ClusterResult {
  ExitRecord record;
  std::vector<double> y_T;
  int evaluations = 0;
  std::vector<std::pair<std::vector<double>, std::vector<double>>> history;  // (y_T, psi)
  // (e^{min y0} + t^2) d(t) relative to its value at t = 0, extremes over [0, T].
  double envelope_max_ratio = 0.0;
  double envelope_min_ratio = 0.0;

  std::vector<double> fitted_gaps_0() const { return record.config_0.gaps(); }
};

struct ShootingOptions {
  RunOptions run;
  double tol_map = 0.01;  // |Psi - y0| accepted by the search
  int budget = 40;
};

namespace detail {

// Initial y_T from the explicit law: a gap y reached at parabolic time t0
// grows by 2 log(1 + T / t0) over [0, T].
inline std::vector<double> law_guess(const KinkProfile& prof, const ShootingProblem& prob) {
  const std::size_t n = prob.n();
  std::vector<double> g;
  for (std::size_t k = 1; k < n; ++k) {
    const double y = prob.y0[k - 1];
    const double t0 =
        std::exp(0.5 * (y + std::log(prof.mass * double(k * (n - k)) / 2.0))) / prof.kappa;
    g.push_back(y + 2.0 * std::log(1.0 + prob.T / t0));
  }
  return g;
}

inline void fill_envelope(ClusterResult& r, const ShootingProblem& prob) {
  const auto& s = r.record.series;
  const double ey = std::exp(*std::min_element(prob.y0.begin(), prob.y0.end()));
  const double e0 = ey * s.g_norm.back();  // t = 0 is the last backward sample
  r.envelope_max_ratio = 0.0;
  r.envelope_min_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double e = (ey + s.t[i] * s.t[i]) * s.g_norm[i];
    r.envelope_max_ratio = std::max(r.envelope_max_ratio, e / e0);
    r.envelope_min_ratio = std::min(r.envelope_min_ratio, e / e0);
  }
}

}  // namespace detail

// Finds y_T with Psi(y_T) = y0: bisection for n = 2, Broyden with a
// Miranda-box fallback for n = 3.
inline ClusterResult construct_cluster(const KinkProfile& prof, const ShootingProblem& prob,
                                       const ShootingOptions& opt = {}) {
  const std::size_t n = prob.n();
  if (n != 2 && n != 3) throw PreconditionError("construct_cluster supports n in {2, 3}");
  if (*std::min_element(prob.y0.begin(), prob.y0.end()) < 10.0) {
    throw PreconditionError("construct_cluster needs min y0 >= 10");
  }
  ClusterResult out;
  double best = std::numeric_limits<double>::infinity();
  auto eval = [&](const std::vector<double>& y) {
    if (out.evaluations >= opt.budget) {
      throw SearchBudgetError("more than " + std::to_string(opt.budget) + " map evaluations");
    }
    ++out.evaluations;
    ExitRecord r = exit_time_map(prof, prob, y, opt.run);
    std::vector<double> res(y.size());
    double err = 0;
    for (std::size_t k = 0; k < y.size(); ++k) {
      res[k] = r.psi[k] - prob.y0[k];
      err = std::max(err, std::abs(res[k]));
    }
    out.history.emplace_back(y, r.psi);
    if (err < best) {
      best = err;
      out.y_T = y;
      out.record = std::move(r);
    }
    return std::make_pair(res, err);
  };
  auto finish = [&] {
    detail::fill_envelope(out, prob);
    return out;
  };

  const std::vector<double> guess = detail::law_guess(prof, prob);
  if (n == 2) {
    // Bracket near the law guess first, then fall back to the full box.
    double lo = std::max(prob.L1, guess[0] - 0.5), hi = std::min(prob.L2, guess[0] + 0.5);
    auto [rlo, elo] = eval({lo});
    if (elo <= opt.tol_map) return finish();
    auto [rhi, ehi] = eval({hi});
    if (ehi <= opt.tol_map) return finish();
    double flo = rlo[0], fhi = rhi[0];
    if (flo * fhi > 0) {
      lo = prob.L1;
      hi = prob.L2;
      flo = eval({lo}).first[0];
      fhi = eval({hi}).first[0];
      if (flo * fhi > 0) throw MirandaSignFailure("Psi - y0 has no sign change on [L1, L2]");
    }
    while (true) {
      const double mid = 0.5 * (lo + hi);
      auto [r, e] = eval({mid});
      if (e <= opt.tol_map) return finish();
      if ((r[0] < 0) == (flo < 0)) {
        lo = mid;
        flo = r[0];
      } else {
        hi = mid;
      }
    }
  }

  // n = 3.  Broyden from the law guess with a finite-difference Jacobian.
  Eigen::Vector2d y(guess[0], guess[1]);
  auto F = [&](const Eigen::Vector2d& z) {
    auto [r, e] = eval({z[0], z[1]});
    return std::make_pair(Eigen::Vector2d(r[0], r[1]), e);
  };
  auto [f, e] = F(y);
  if (e <= opt.tol_map) return finish();
  Eigen::Matrix2d J;
  const double h = 0.1;
  for (int j = 0; j < 2; ++j) {
    Eigen::Vector2d z = y;
    z[j] += h;
    J.col(j) = (F(z).first - f) / h;
  }
  bool broyden_ok = true;
  for (int it = 0; it < 8; ++it) {
    const Eigen::Vector2d step = -J.fullPivLu().solve(f);
    Eigen::Vector2d z = y + step;
    if (!step.allFinite() || (z.array() < prob.L1).any() || (z.array() > prob.L2).any()) {
      broyden_ok = false;
      break;
    }
    auto [fz, ez] = F(z);
    if (ez <= opt.tol_map) return finish();
    J += (fz - f - J * step) * step.transpose() / step.squaredNorm();
    if (fz.norm() > 2.0 * f.norm()) {
      broyden_ok = false;
      break;
    }
    y = z;
    f = fz;
  }
  (void)broyden_ok;

  // Miranda box around the best point so far: Psi_i - y0_i must change sign
  // across the pair of faces orthogonal to axis i.  Shrink toward the center.
  Eigen::Vector2d c(out.y_T[0], out.y_T[1]);
  double r = 0.5;
  auto sign_ok = [&](const Eigen::Vector2d& ctr, double rad) {
    for (int i = 0; i < 2; ++i) {
      Eigen::Vector2d lo = ctr, hi = ctr;
      lo[i] -= rad;
      hi[i] += rad;
      if (F(lo).first[i] > 0 || F(hi).first[i] < 0) return false;
    }
    return true;
  };
  if (!sign_ok(c, r)) {
    r *= 2;
    if (!sign_ok(c, r)) throw MirandaSignFailure("Miranda sign condition fails on the box");
  }
  Eigen::Vector2d lo = c.array() - r, hi = c.array() + r;
  while (true) {
    const Eigen::Vector2d mid = 0.5 * (lo + hi);
    auto [fm, em] = F(mid);
    if (em <= opt.tol_map) return finish();
    for (int i = 0; i < 2; ++i) {
      if (fm[i] > 0) {
        hi[i] = mid[i];
      } else {
        lo[i] = mid[i];
      }
    }
  }
}

// ---- forward launch -------------------------------------------------------

struct LaunchOptions {
  RunOptions run{0.05, 0.8, 2.0, true};
  double t_run = 0.0;       // run length; 0 means up to the safe-window limit
  double half_width = 0.0;  // domain half width; 0 means fit it to t_run
  bool reverse = false;     // flip the initial velocities (kinks approach)
  double center = 0.0;
};

struct LaunchResult {
  double t_launch = 0.0;
  MultikinkConfig initial;
  RunRecord run;
  ModulationSeries series;  // times include t_launch
};

inline LaunchResult launch_parabolic(const KinkProfile& prof, std::size_t n, double t_launch,
                                     const LaunchOptions& opt = {}) {
  if (n < 1) throw PreconditionError("launch needs n >= 1");
  const TodaState ts = explicit_parabolic(n, prof.mass, prof.kappa, t_launch, opt.center);
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) v[k] = ts.p[k] / prof.mass;
  LaunchResult out;
  out.t_launch = t_launch;
  out.initial = MultikinkConfig(ts.a, v);
  if (proximity(out.initial) > 1e-2) throw PreconditionError("launch needs rho <= 1e-2");

  double t_run = opt.t_run;
  Grid grid = opt.half_width > 0
                  ? Grid::with_spacing(opt.center - opt.half_width, opt.center + opt.half_width,
                                       opt.run.dx)
                  : grid_for(out.initial, t_run, opt.run.dx);
  const double safe = safe_window(grid, out.initial);
  if (t_run <= 0) t_run = safe;
  if (t_run > safe + 1e-9) throw PreconditionError("run length exceeds the safe window");
  if (!(t_run > 0)) throw PreconditionError("empty run");

  FieldState s = prepare_state(prof, out.initial, grid, opt.run.quasi_static && n > 1);
  MultikinkConfig seed = out.initial;
  if (opt.reverse) {
    s = time_reverse(s);
    for (double& x : seed.v) x = -x;
  }
  ModulationTracker tracker(prof, n, t_launch, true);
  tracker.seed(seed);
  out.run = evolve(prof.potential, s, t_run, opt.run.dt(), opt.run.sample_interval,
                   tracker.observer());
  out.series = tracker.series();
  return out;
}

// ---- verification ---------------------------------------------------------

struct VerificationReport {
  double t_star = 0.0;
  double t_min = 0.0, t_max = 0.0, window_start = 0.0;
  double gap_deviation = 0.0;       // max over the final half window
  double velocity_deviation = 0.0;  // max |(t+t*) v_k + (n+1-2k)|
  double tg_max = 0.0;              // max (t+t*) ||g||_E
  double tg_slope = 0.0;            // regression slope of (t+t*) ||g||_E in t
  bool non_monotone = false;
  double gap_tol = 0.1, velocity_tol = 0.1;

  bool gap_ok() const { return !non_monotone && gap_deviation <= gap_tol; }
  bool velocity_ok() const { return !non_monotone && velocity_deviation <= velocity_tol; }
  bool g_ok() const { return tg_slope <= 0.0; }
  bool pass() const { return gap_ok() && velocity_ok() && g_ok(); }
};

inline VerificationReport verify_asymptotics(const ModulationSeries& s, double mass,
                                             double kappa, double gap_tol = 0.1,
                                             double velocity_tol = 0.1) {
  VerificationReport r;
  r.gap_tol = gap_tol;
  r.velocity_tol = velocity_tol;
  const std::size_t m = s.size(), n = s.n;
  if (m < 3 || n < 2) throw PreconditionError("verification needs n >= 2 and 3 samples");
  r.t_min = s.t.front();
  r.t_max = s.t.back();
  if (!(r.t_min > 0) || r.t_max / r.t_min < 4.0 - 1e-9) {
    throw PreconditionError("series must span a time ratio >= 4");
  }
  auto gaps = [&](std::size_t i) {
    std::vector<double> y;
    for (std::size_t k = 1; k < n; ++k) y.push_back(s.a[i][k] - s.a[i][k - 1]);
    return y;
  };
  auto law = [&](double t, std::size_t k) {
    return 2.0 * std::log(kappa * t) - std::log(mass * double(k * (n - k)) / 2.0);
  };

  // Law of the gaps is increasing in t; anything else means it does not apply.
  for (std::size_t i = 1; i < m; ++i) {
    const auto y0 = gaps(i - 1), y1 = gaps(i);
    for (std::size_t k = 0; k + 1 < n; ++k) {
      if (y1[k] < y0[k] - 1e-9) r.non_monotone = true;
    }
  }

  auto sse = [&](double ts) {
    double e = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const auto y = gaps(i);
      for (std::size_t k = 1; k < n; ++k) {
        const double d = y[k - 1] - law(s.t[i] + ts, k);
        e += d * d;
      }
    }
    return e;
  };
  const auto best =
      boost::math::tools::brent_find_minima(sse, -0.9 * r.t_min, 2.0 * r.t_max, 50);
  r.t_star = best.first;
  if (std::abs(r.t_star) < 1e-9 * r.t_max) r.t_star = 0.0;

  r.window_start = 0.5 * (r.t_min + r.t_max);
  double sx = 0, sy = 0, sxx = 0, sxy = 0, cnt = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (s.t[i] < r.window_start) continue;
    const double tt = s.t[i] + r.t_star;
    const auto y = gaps(i);
    for (std::size_t k = 1; k < n; ++k) {
      r.gap_deviation = std::max(r.gap_deviation, std::abs(y[k - 1] - law(tt, k)));
    }
    for (std::size_t k = 1; k <= n; ++k) {
      const double c = double(n) + 1.0 - 2.0 * double(k);
      r.velocity_deviation = std::max(r.velocity_deviation, std::abs(tt * s.v[i][k - 1] + c));
    }
    const double tg = tt * s.g_norm[i];
    r.tg_max = std::max(r.tg_max, tg);
    sx += s.t[i];
    sy += tg;
    sxx += s.t[i] * s.t[i];
    sxy += s.t[i] * tg;
    cnt += 1;
  }
  const double den = cnt * sxx - sx * sx;
  r.tg_slope = den > 0 ? (cnt * sxy - sx * sy) / den : 0.0;
  return r;
}

// Series of an explicit Toda trajectory in the tracker's format (g = 0).
inline ModulationSeries series_from_toda(const std::vector<TodaState>& traj) {
  ModulationSeries s;
  if (traj.empty()) return s;
  s.n = traj.front().n();
  for (const auto& x : traj) {
    s.t.push_back(x.time);
    s.a.push_back(x.a);
    std::vector<double> v(s.n);
    for (std::size_t k = 0; k < s.n; ++k) v[k] = x.p[k] / x.mass;
    s.v.push_back(v);
    s.p.push_back(x.p);
    s.force.push_back(std::vector<double>(s.n, 0.0));
    s.g_norm.push_back(0.0);
    s.rho.push_back(proximity(MultikinkConfig(x.a, v)));
    s.max_orth.push_back(0.0);
    s.mv_minus_p.push_back(std::vector<double>(s.n, 0.0));
    s.dp_minus_force.push_back(std::vector<double>(s.n, 0.0));
  }
  return s;
}

}  // namespace kinkclusters
