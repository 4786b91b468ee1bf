#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kinkclusters/errors.hpp"
#include "kinkclusters/field_solver.hpp"
#include "kinkclusters/grid.hpp"
#include "kinkclusters/kink.hpp"
#include "kinkclusters/multikink.hpp"

namespace kinkclusters {

// A pair (u, u_t) of grid functions, the phase-space element used for all
// tangent vectors below.
struct GridPair {
  std::vector<double> first, second;
};

namespace detail {

// Samples of one boosted kink on a grid: s = gamma (x - a), the profile and
// its first three derivatives at s, and x - a.
struct KinkSamples {
  double a = 0, v = 0, gamma = 1;
  std::vector<double> xa, h, h1, h2, h3;

  KinkSamples(const KinkProfile& prof, double a_, double v_, const Grid& g)
      : a(a_), v(v_), gamma(lorentz_gamma(v_)) {
    const std::size_t n = g.nodes();
    xa.resize(n);
    h.resize(n);
    h1.resize(n);
    h2.resize(n);
    h3.resize(n);
    const Potential& p = prof.potential;
    for (std::size_t i = 0; i < n; ++i) {
      xa[i] = g.x(i) - a;
      const double s = gamma * xa[i];
      h[i] = prof.H(s);
      h1[i] = prof.dH(s);
      h2[i] = p.du(h[i]);
      h3[i] = p.d2u(h[i]) * h1[i];
    }
  }

  // Each tangent object is written as pointwise formulas in h1, h2, h3.
  template <class F0, class F1>
  GridPair build(F0 f0, F1 f1) const {
    GridPair r;
    r.first.resize(xa.size());
    r.second.resize(xa.size());
    for (std::size_t i = 0; i < xa.size(); ++i) {
      r.first[i] = f0(i);
      r.second[i] = f1(i);
    }
    return r;
  }

  GridPair alpha() const {
    const double g = gamma, g2 = g * g;
    return build([&](std::size_t i) { return g2 * v * h2[i]; },
                 [&](std::size_t i) { return g * h1[i]; });
  }
  GridPair beta() const {
    const double g3 = std::pow(gamma, 3), g4 = g3 * gamma;
    return build([&](std::size_t i) { return -g3 * h1[i] - g4 * v * v * xa[i] * h2[i]; },
                 [&](std::size_t i) { return -g3 * v * xa[i] * h1[i]; });
  }
  GridPair d_a() const {
    const double g = gamma;
    return build([&](std::size_t i) { return -g * h1[i]; },
                 [&](std::size_t i) { return g * g * v * h2[i]; });
  }
  GridPair d_v() const {
    const double g3 = std::pow(gamma, 3), g4 = g3 * gamma;
    return build([&](std::size_t i) { return g3 * v * xa[i] * h1[i]; },
                 [&](std::size_t i) { return -g3 * h1[i] - g4 * v * v * xa[i] * h2[i]; });
  }
  GridPair d_a_alpha() const {
    const double g2 = gamma * gamma, g3 = g2 * gamma;
    return build([&](std::size_t i) { return -g3 * v * h3[i]; },
                 [&](std::size_t i) { return -g2 * h2[i]; });
  }
  // d(alpha)/dv, which equals d(beta)/da.
  GridPair d_v_alpha() const {
    const double g2 = gamma * gamma, g3 = g2 * gamma, g4 = g3 * gamma, g5 = g4 * gamma;
    return build(
        [&](std::size_t i) { return (g2 + 2 * g4 * v * v) * h2[i] + g5 * v * v * xa[i] * h3[i]; },
        [&](std::size_t i) { return g3 * v * h1[i] + g4 * v * xa[i] * h2[i]; });
  }
  GridPair d_v_beta() const {
    const double g3 = std::pow(gamma, 3), g4 = g3 * gamma, g5 = g4 * gamma, g6 = g5 * gamma,
                 g7 = g6 * gamma;
    const double v2 = v * v, v3 = v2 * v;
    return build(
        [&](std::size_t i) {
          const double y = xa[i];
          return -3 * g5 * v * h1[i] - g6 * v * y * h2[i] -
                 (4 * g6 * v3 + 2 * g4 * v) * y * h2[i] - g7 * v3 * y * y * h3[i];
        },
        [&](std::size_t i) {
          const double y = xa[i];
          return -(3 * g5 * v2 + g3) * y * h1[i] - g6 * v2 * y * y * h2[i];
        });
  }
};

inline double pair_dot(const GridPair& u, const GridPair& w, double dx,
                       std::vector<double>& scratch) {
  scratch.resize(u.first.size());
  for (std::size_t i = 0; i < scratch.size(); ++i) {
    scratch[i] = u.first[i] * w.first[i] + u.second[i] * w.second[i];
  }
  return simpson(scratch, dx);
}

inline double pair_dot(const GridPair& u, const GridPair& w, double dx) {
  std::vector<double> s;
  return pair_dot(u, w, dx, s);
}

}  // namespace detail

struct TangentVectors {
  GridPair alpha, beta;
};

// alpha = J d_a H(a, v) and beta = J d_v H(a, v) for a single kink.
inline TangentVectors tangent_vectors(const KinkProfile& prof, double a, double v,
                                      const Grid& grid) {
  if (!(std::abs(v) < 1)) throw PreconditionError("tangent_vectors needs |v| < 1");
  const detail::KinkSamples k(prof, a, v, grid);
  return {k.alpha(), k.beta()};
}

// d_a H(a, v) and d_v H(a, v) for a single (unsigned) kink.
inline TangentVectors parameter_derivatives(const KinkProfile& prof, double a, double v,
                                            const Grid& grid) {
  const detail::KinkSamples k(prof, a, v, grid);
  return {k.d_a(), k.d_v()};
}

struct Decomposition {
  MultikinkConfig config;
  GridPair g;                          // residual (g, g_t)
  std::vector<double> orth_residuals;  // <g, alpha_1>, <g, beta_1>, <g, alpha_2>, ...
  double energy_norm_g = 0.0;
  int iterations = 0;
};

inline double energy_norm(const GridPair& g, double dx) {
  const std::vector<double> dg = derivative(g.first, dx);
  std::vector<double> e(g.first.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    e[i] = g.second[i] * g.second[i] + dg[i] * dg[i] + g.first[i] * g.first[i];
  }
  return std::sqrt(simpson(e, dx));
}

namespace detail {

struct FitPoint {
  std::vector<KinkSamples> kinks;
  GridPair g;
  Eigen::VectorXd gamma_map;
};

inline FitPoint evaluate_fit(const KinkProfile& prof, const FieldState& s,
                             const MultikinkConfig& cfg) {
  const Grid& grid = s.grid;
  const double dx = grid.dx();
  const std::size_t n = cfg.n();
  FitPoint fp;
  fp.g.first = s.phi;
  fp.g.second = s.phidot;
  for (std::size_t i = 0; i < s.phi.size(); ++i) fp.g.first[i] -= 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    fp.kinks.emplace_back(prof, cfg.a[k], cfg.v[k], grid);
    const KinkSamples& ks = fp.kinks.back();
    const double sg = kink_sign(k + 1);
    const double vg = ks.v * ks.gamma;
    for (std::size_t i = 0; i < s.phi.size(); ++i) {
      fp.g.first[i] -= sg * (ks.h[i] + 1.0);
      fp.g.second[i] -= sg * (-vg * ks.h1[i]);
    }
  }
  fp.gamma_map.resize(2 * Eigen::Index(n));
  std::vector<double> scratch;
  for (std::size_t k = 0; k < n; ++k) {
    fp.gamma_map[2 * k] = pair_dot(fp.g, fp.kinks[k].alpha(), dx, scratch);
    fp.gamma_map[2 * k + 1] = pair_dot(fp.g, fp.kinks[k].beta(), dx, scratch);
  }
  return fp;
}

// Jacobian of the orthogonality map with respect to (a_1, v_1, a_2, v_2, ...).
inline Eigen::MatrixXd fit_jacobian(const FitPoint& fp, double dx) {
  const std::size_t n = fp.kinks.size();
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2 * Eigen::Index(n), 2 * Eigen::Index(n));
  std::vector<GridPair> alpha(n), beta(n), da(n), dv(n);
  for (std::size_t k = 0; k < n; ++k) {
    alpha[k] = fp.kinks[k].alpha();
    beta[k] = fp.kinks[k].beta();
    da[k] = fp.kinks[k].d_a();
    dv[k] = fp.kinks[k].d_v();
  }
  std::vector<double> scratch;
  for (std::size_t k = 0; k < n; ++k) {
    const Eigen::Index r = 2 * Eigen::Index(k);
    for (std::size_t j = 0; j < n; ++j) {
      const Eigen::Index c = 2 * Eigen::Index(j);
      const double sg = kink_sign(j + 1);
      jac(r, c) = -sg * pair_dot(da[j], alpha[k], dx, scratch);
      jac(r, c + 1) = -sg * pair_dot(dv[j], alpha[k], dx, scratch);
      jac(r + 1, c) = -sg * pair_dot(da[j], beta[k], dx, scratch);
      jac(r + 1, c + 1) = -sg * pair_dot(dv[j], beta[k], dx, scratch);
    }
    const GridPair dva = fp.kinks[k].d_v_alpha();
    jac(r, r) += pair_dot(fp.g, fp.kinks[k].d_a_alpha(), dx, scratch);
    jac(r, r + 1) += pair_dot(fp.g, dva, dx, scratch);
    jac(r + 1, r) += pair_dot(fp.g, dva, dx, scratch);
    jac(r + 1, r + 1) += pair_dot(fp.g, fp.kinks[k].d_v_beta(), dx, scratch);
  }
  return jac;
}

inline bool admissible(const MultikinkConfig& c) {
  for (std::size_t k = 0; k < c.n(); ++k) {
    if (!std::isfinite(c.a[k]) || !(std::abs(c.v[k]) < 1.0)) return false;
    if (k > 0 && !(c.a[k] > c.a[k - 1])) return false;
  }
  return true;
}

}  // namespace detail

// Orthogonality map Gamma(a, v) = (<phi - H(a,v), alpha_k>, <phi - H(a,v), beta_k>)_k.
inline Eigen::VectorXd orthogonality_map(const KinkProfile& prof, const FieldState& s,
                                         const MultikinkConfig& cfg) {
  return detail::evaluate_fit(prof, s, cfg).gamma_map;
}

inline Eigen::MatrixXd orthogonality_jacobian(const KinkProfile& prof, const FieldState& s,
                                              const MultikinkConfig& cfg) {
  return detail::fit_jacobian(detail::evaluate_fit(prof, s, cfg), s.grid.dx());
}

inline constexpr double kFitTolerance = 1e-10;

// Damped Newton for Gamma = 0 from `guess`.  Steps are halved down to 2^-10
// until the residual decreases; steps that break the ordering of a or leave
// |v| < 1 are treated as failed trials.
inline Decomposition fit(const KinkProfile& prof, const FieldState& s,
                         const MultikinkConfig& guess, int max_iterations = 50) {
  guess.check();
  const double dx = s.grid.dx();
  const std::size_t n = guess.n();
  MultikinkConfig cfg = guess;
  detail::FitPoint fp = detail::evaluate_fit(prof, s, cfg);
  int it = 0;
  while (fp.gamma_map.size() > 0 && fp.gamma_map.cwiseAbs().maxCoeff() > kFitTolerance) {
    if (++it > max_iterations) {
      throw FitDivergence("modulation fit did not converge in " +
                          std::to_string(max_iterations) + " iterations");
    }
    const Eigen::MatrixXd jac = detail::fit_jacobian(fp, dx);
    const Eigen::VectorXd step = jac.fullPivLu().solve(-fp.gamma_map);
    const double r0 = fp.gamma_map.norm();
    bool accepted = false;
    for (double lam = 1.0; lam >= 1.0 / 1024; lam *= 0.5) {
      MultikinkConfig trial = cfg;
      for (std::size_t k = 0; k < n; ++k) {
        trial.a[k] += lam * step[2 * k];
        trial.v[k] += lam * step[2 * k + 1];
      }
      if (!detail::admissible(trial)) continue;
      detail::FitPoint tp = detail::evaluate_fit(prof, s, trial);
      const double r1 = tp.gamma_map.norm();
      if (r1 < r0 || tp.gamma_map.cwiseAbs().maxCoeff() <= kFitTolerance) {
        cfg = std::move(trial);
        fp = std::move(tp);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      throw FitDivergence("modulation fit: no decrease at the damping floor");
    }
  }
  // Newton is quadratic here; a couple of extra steps cost little and take
  // the parameters from ~tolerance/M down to rounding level.
  for (int polish = 0; polish < 2 && fp.gamma_map.size() > 0; ++polish) {
    const Eigen::VectorXd step =
        detail::fit_jacobian(fp, dx).fullPivLu().solve(-fp.gamma_map);
    MultikinkConfig trial = cfg;
    for (std::size_t k = 0; k < n; ++k) {
      trial.a[k] += step[2 * k];
      trial.v[k] += step[2 * k + 1];
    }
    if (!detail::admissible(trial)) break;
    detail::FitPoint tp = detail::evaluate_fit(prof, s, trial);
    if (!(tp.gamma_map.norm() < fp.gamma_map.norm())) break;
    cfg = std::move(trial);
    fp = std::move(tp);
  }
  // Overlapping kink/antikink pairs annihilate into the vacuum, which the
  // map happily "fits"; such a decomposition is meaningless.
  if (n > 1 && cfg.y_min() < 1.0) {
    throw FitDivergence("modulation fit collapsed two kinks (gap < 1)");
  }
  Decomposition d;
  d.config = cfg;
  d.g = std::move(fp.g);
  d.orth_residuals.assign(fp.gamma_map.data(), fp.gamma_map.data() + fp.gamma_map.size());
  d.energy_norm_g = energy_norm(d.g, dx);
  d.iterations = it;
  return d;
}

// Zeros of phi by linear interpolation, v = 0.
inline MultikinkConfig initial_guess(const FieldState& s, std::size_t n) {
  std::vector<double> zeros;
  const Grid& g = s.grid;
  for (std::size_t i = 0; i + 1 < s.phi.size(); ++i) {
    const double f0 = s.phi[i], f1 = s.phi[i + 1];
    if ((f0 < 0 && f1 >= 0) || (f0 > 0 && f1 <= 0)) {
      if (f1 == 0 && i + 2 < s.phi.size() && (s.phi[i + 2] > 0) == (f0 > 0)) {
        continue;  // touches zero without crossing
      }
      zeros.push_back(g.x(i) + g.dx() * f0 / (f0 - f1));
    }
  }
  if (zeros.size() != n) {
    throw SectorMismatch("expected " + std::to_string(n) + " zero crossings, found " +
                         std::to_string(zeros.size()));
  }
  return MultikinkConfig(zeros, std::vector<double>(n, 0.0));
}

// ||phi - H(a, v)||_E^2 + rho(a, v) at the fitted orthogonal parameters: an
// upper proxy for the distance to the multikink family.
inline std::pair<double, MultikinkConfig> distance_to_family(const KinkProfile& prof,
                                                             const FieldState& s,
                                                             std::size_t n) {
  try {
    const Decomposition d = fit(prof, s, initial_guess(s, n));
    return {d.energy_norm_g * d.energy_norm_g + proximity(d.config), d.config};
  } catch (const FitDivergence& e) {
    throw NoNearbyMultikink(e.what());
  } catch (const SectorMismatch& e) {
    throw NoNearbyMultikink(e.what());
  }
}

// Quintic smoothstep: 1 below 1/3, 0 above 2/3, C^2.
inline double smooth_cutoff(double x) {
  const double t = std::clamp(3.0 * x - 1.0, 0.0, 1.0);
  return 1.0 - t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}

// Partition of unity chi_k attached to the fitted kinks (1-based k).
inline std::vector<double> cutoff_weights(const MultikinkConfig& c, std::size_t k,
                                          const Grid& g) {
  const std::size_t n = c.n();
  std::vector<double> w(g.nodes(), 1.0);
  if (n <= 1) return w;
  for (std::size_t i = 0; i < g.nodes(); ++i) {
    const double x = g.x(i);
    double right = 0.0, left = 0.0;
    if (k < n) right = smooth_cutoff((x - c.a[k - 1]) / (c.a[k] - c.a[k - 1]));
    if (k > 1) left = smooth_cutoff((x - c.a[k - 2]) / (c.a[k - 1] - c.a[k - 2]));
    if (k == 1) {
      w[i] = right;
    } else if (k == n) {
      w[i] = 1.0 - left;
    } else {
      w[i] = right - left;
    }
  }
  return w;
}

// p_k = -<(-1)^k dH_k + chi_k dg, phi_t>.
inline double localized_momentum(const KinkProfile& prof, const FieldState& s,
                                 const Decomposition& dec, std::size_t k) {
  const std::size_t n = dec.config.n();
  if (k < 1 || k > n) throw PreconditionError("momentum index out of range");
  const Grid& grid = s.grid;
  const double dx = grid.dx();
  const double a = dec.config.a[k - 1];
  const double gam = lorentz_gamma(dec.config.v[k - 1]);
  const double sg = kink_sign(k);
  const std::vector<double> chi = cutoff_weights(dec.config, k, grid);
  const std::vector<double> dg = derivative(dec.g.first, dx);
  std::vector<double> f(grid.nodes());
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double dh = gam * prof.dH(gam * (grid.x(i) - a));
    f[i] = (sg * dh + chi[i] * dg[i]) * s.phidot[i];
  }
  return -simpson(f, dx);
}

// Time series of the fitted modulation parameters along a run, with the
// diagnostics |M v_k - p_k| / rho and |p_k' - F_k| (-log rho) / rho.
struct ModulationSeries {
  std::size_t n = 0;
  std::vector<double> t, g_norm, rho, max_orth;
  std::vector<std::vector<double>> a, v, p, force;
  std::vector<std::vector<double>> mv_minus_p, dp_minus_force;

  std::size_t size() const { return t.size(); }

  std::vector<std::string> header() const {
    std::vector<std::string> h{"t"};
    for (const char* pre : {"a_", "v_", "p_"}) {
      for (std::size_t k = 1; k <= n; ++k) h.push_back(pre + std::to_string(k));
    }
    h.push_back("g_norm");
    h.push_back("rho");
    for (const char* pre : {"mv_p_", "dp_F_"}) {
      for (std::size_t k = 1; k <= n; ++k) h.push_back(pre + std::to_string(k));
    }
    return h;
  }

  std::vector<double> row(std::size_t i) const {
    std::vector<double> r{t[i]};
    for (const auto* col : {&a, &v, &p}) r.insert(r.end(), (*col)[i].begin(), (*col)[i].end());
    r.push_back(g_norm[i]);
    r.push_back(rho[i]);
    r.insert(r.end(), mv_minus_p[i].begin(), mv_minus_p[i].end());
    r.insert(r.end(), dp_minus_force[i].begin(), dp_minus_force[i].end());
    return r;
  }
};

// Fits each sampled state, warm-starting from the previous fit.  Use
// observer() as the evolve() observer, then series() for the diagnostics.
class ModulationTracker {
 public:
  ModulationTracker(const KinkProfile& prof, std::size_t n, double time_offset = 0.0,
                    bool with_forces = true)
      : prof_(prof), n_(n), offset_(time_offset), with_forces_(with_forces) {
    raw_.n = n;
  }

  void seed(const MultikinkConfig& guess) { last_ = guess; has_last_ = true; }

  Decomposition observe(const FieldState& s) {
    Decomposition d;
    try {
      d = fit(prof_, s, has_last_ ? last_ : initial_guess(s, n_));
    } catch (const FitDivergence& e) {
      throw FitDivergence(std::string(e.what()) + " at t = " + std::to_string(s.time));
    }
    last_ = d.config;
    has_last_ = true;
    raw_.t.push_back(s.time + offset_);
    raw_.a.push_back(d.config.a);
    raw_.v.push_back(d.config.v);
    std::vector<double> p(n_), f(n_, 0.0);
    for (std::size_t k = 1; k <= n_; ++k) {
      p[k - 1] = localized_momentum(prof_, s, d, k);
      if (with_forces_) f[k - 1] = interaction_force(prof_, d.config, k);
    }
    raw_.p.push_back(p);
    raw_.force.push_back(f);
    raw_.g_norm.push_back(d.energy_norm_g);
    raw_.rho.push_back(proximity(d.config));
    double mo = 0;
    for (double r : d.orth_residuals) mo = std::max(mo, std::abs(r));
    raw_.max_orth.push_back(mo);
    last_decomposition_ = d;
    return d;
  }

  Observer observer() {
    return [this](const FieldState& s) {
      observe(s);
      return std::vector<double>{};
    };
  }

  const Decomposition& last() const { return last_decomposition_; }

  // p' by five-point central differences (uniform sampling assumed); the two
  // samples at each end get NaN in that column.
  ModulationSeries series() const {
    ModulationSeries s = raw_;
    const std::size_t m = s.size();
    const double mass = prof_.mass;
    s.mv_minus_p.assign(m, std::vector<double>(n_, 0.0));
    s.dp_minus_force.assign(m, std::vector<double>(n_, std::numeric_limits<double>::quiet_NaN()));
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t k = 0; k < n_; ++k) {
        s.mv_minus_p[i][k] = std::abs(mass * s.v[i][k] - s.p[i][k]) / s.rho[i];
        if (i >= 2 && i + 2 < m && with_forces_) {
          const double h = (s.t[i + 2] - s.t[i - 2]) / 4.0;
          const double dp = (s.p[i - 2][k] - 8 * s.p[i - 1][k] + 8 * s.p[i + 1][k] -
                             s.p[i + 2][k]) / (12 * h);
          s.dp_minus_force[i][k] =
              std::abs(dp - s.force[i][k]) * (-std::log(s.rho[i])) / s.rho[i];
        }
      }
    }
    return s;
  }

 private:
  const KinkProfile& prof_;
  std::size_t n_;
  double offset_;
  bool with_forces_;
  bool has_last_ = false;
  MultikinkConfig last_;
  Decomposition last_decomposition_;
  ModulationSeries raw_;
};

}  // namespace kinkclusters
