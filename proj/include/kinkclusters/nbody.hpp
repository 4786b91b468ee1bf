#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/numeric/odeint.hpp>

#include "kinkclusters/errors.hpp"

namespace kinkclusters {

// Positions and momenta of the attractive Toda system
//   a_k' = p_k / M,  p_k' = 2 kappa^2 (e^{-y_k} - e^{-y_{k-1}}).
struct TodaState {
  std::vector<double> a, p;
  double time = 0.0;
  double mass = 1.0;
  double kappa = 1.0;

  std::size_t n() const { return a.size(); }
  std::vector<double> gaps() const {
    std::vector<double> y;
    for (std::size_t k = 1; k < a.size(); ++k) y.push_back(a[k] - a[k - 1]);
    return y;
  }
};

inline std::pair<std::vector<double>, std::vector<double>> toda_rhs(const TodaState& s) {
  const std::size_t n = s.n();
  std::vector<double> da(n), dp(n, 0.0);
  const double c = 2.0 * s.kappa * s.kappa;
  for (std::size_t k = 0; k < n; ++k) da[k] = s.p[k] / s.mass;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double f = c * std::exp(-(s.a[k + 1] - s.a[k]));
    dp[k] += f;
    dp[k + 1] -= f;
  }
  return {da, dp};
}

// Sum p^2 / 2M - 2 kappa^2 sum e^{-y}.  Zero on every parabolic motion.
inline double toda_energy(const TodaState& s) {
  double e = 0.0;
  for (double p : s.p) e += p * p / (2.0 * s.mass);
  for (double y : s.gaps()) e -= 2.0 * s.kappa * s.kappa * std::exp(-y);
  return e;
}

inline double toda_momentum(const TodaState& s) {
  return std::accumulate(s.p.begin(), s.p.end(), 0.0);
}

// Gap law y_k = 2 log(kappa t) - log(M k (n-k) / 2) and v_k = -(n+1-2k)/t.
inline std::pair<std::vector<double>, std::vector<double>> asymptotic_law(std::size_t n,
                                                                          double mass,
                                                                          double kappa,
                                                                          double t) {
  if (!(t > 0)) throw PreconditionError("asymptotic_law needs t > 0");
  std::vector<double> y, v;
  for (std::size_t k = 1; k < n; ++k) {
    y.push_back(2.0 * std::log(kappa * t) - std::log(mass * double(k * (n - k)) / 2.0));
  }
  for (std::size_t k = 1; k <= n; ++k) v.push_back(-(double(n) + 1.0 - 2.0 * double(k)) / t);
  return {y, v};
}

// The exact parabolic solution at time t with barycenter `center`.
inline TodaState explicit_parabolic(std::size_t n, double mass, double kappa, double t,
                                    double center = 0.0) {
  auto [y, v] = asymptotic_law(n, mass, kappa, t);
  TodaState s;
  s.mass = mass;
  s.kappa = kappa;
  s.time = t;
  s.a.assign(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) s.a[k] = s.a[k - 1] + y[k - 1];
  const double mean = n ? std::accumulate(s.a.begin(), s.a.end(), 0.0) / double(n) : 0.0;
  for (double& a : s.a) a += center - mean;
  s.p.resize(n);
  for (std::size_t k = 0; k < n; ++k) s.p[k] = mass * v[k];
  return s;
}

// Time at which the explicit parabolic solution has smallest gap y.
inline double parabolic_time_for_gap(std::size_t n, double mass, double kappa, double y) {
  if (n < 2) throw PreconditionError("need n >= 2 for a gap");
  double smax = 0;
  for (std::size_t k = 1; k < n; ++k) smax = std::max(smax, double(k * (n - k)) / 2.0);
  return std::exp(0.5 * (y + std::log(mass * smax))) / kappa;
}

struct TodaOptions {
  double tol = 1e-12;
  double collision_gap = 0.5;
  std::vector<double> output_times;  // empty: record every accepted step
};

// Adaptive Dormand-Prince integration from s.time to t_final.  Stops with a
// CollisionEvent when a gap drops below options.collision_gap.
inline std::vector<TodaState> integrate(const TodaState& s, double t_final,
                                        const TodaOptions& opt = {}) {
  if (!(t_final > s.time)) throw PreconditionError("integrate needs t_final > time");
  namespace odeint = boost::numeric::odeint;
  using state = std::vector<double>;
  const std::size_t n = s.n();
  const double mass = s.mass, c = 2.0 * s.kappa * s.kappa;

  auto rhs = [&](const state& x, state& dx, double) {
    for (std::size_t k = 0; k < n; ++k) {
      dx[k] = x[n + k] / mass;
      dx[n + k] = 0.0;
    }
    for (std::size_t k = 0; k + 1 < n; ++k) {
      const double f = c * std::exp(-(x[k + 1] - x[k]));
      dx[n + k] += f;
      dx[n + k + 1] -= f;
    }
  };
  auto to_state = [&](const state& x, double t) {
    TodaState r = s;
    r.time = t;
    r.a.assign(x.begin(), x.begin() + long(n));
    r.p.assign(x.begin() + long(n), x.end());
    return r;
  };

  state x(2 * n);
  std::copy(s.a.begin(), s.a.end(), x.begin());
  std::copy(s.p.begin(), s.p.end(), x.begin() + long(n));
  auto stepper = odeint::make_controlled(opt.tol, opt.tol, odeint::runge_kutta_dopri5<state>());

  std::vector<TodaState> out{s};
  std::vector<double> targets = opt.output_times;
  std::sort(targets.begin(), targets.end());
  std::size_t next = 0;
  while (next < targets.size() && targets[next] <= s.time) ++next;

  double t = s.time;
  double dt = std::min(1e-2 * std::max(1.0, std::abs(t)), t_final - t);
  while (t < t_final) {
    double stop = t_final;
    if (next < targets.size()) stop = std::min(stop, targets[next]);
    const bool clipped = t + dt >= stop;
    double h = clipped ? stop - t : dt;
    const double h_try = h;
    if (stepper.try_step(rhs, x, t, h) == odeint::fail) {
      if (h < 1e-14 * std::max(1.0, std::abs(t))) {
        throw StiffnessError("Toda integration step underflow at t = " + std::to_string(t));
      }
      dt = h;
      continue;
    }
    if (clipped && std::abs(t - stop) < 1e-12 * std::max(1.0, stop)) t = stop;
    // Keep the controller's suggestion unless the step was cut to hit a target.
    dt = clipped ? std::max(dt, h) : h;
    (void)h_try;
    for (std::size_t k = 0; k + 1 < n; ++k) {
      if (x[k + 1] - x[k] < opt.collision_gap) {
        throw CollisionEvent("Toda gap fell below collision threshold", t);
      }
    }
    const bool at_target = next < targets.size() && t >= targets[next];
    if (at_target) ++next;
    if (targets.empty() || at_target || t >= t_final) out.push_back(to_state(x, t));
  }
  return out;
}

// Runs the Toda system backwards in time (time reversal flips momenta).
inline TodaState integrate_backward(const TodaState& s, double t_target,
                                    const TodaOptions& opt = {}) {
  TodaState r = s;
  for (double& p : r.p) p = -p;
  r.time = -s.time;
  TodaOptions o = opt;
  o.output_times.clear();
  TodaState e = integrate(r, -t_target, o).back();
  for (double& p : e.p) p = -p;
  e.time = t_target;
  return e;
}

// ---- linear algebra -------------------------------------------------------

inline Eigen::MatrixXd dirichlet_laplacian(std::size_t n) {
  if (n < 2) return {};
  const Eigen::Index m = Eigen::Index(n) - 1;
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    d(i, i) = 2.0;
    if (i + 1 < m) d(i, i + 1) = d(i + 1, i) = -1.0;
  }
  return d;
}

inline Eigen::VectorXd sigma(std::size_t n) {
  if (n < 2) return {};
  Eigen::VectorXd s(Eigen::Index(n) - 1);
  for (std::size_t k = 1; k < n; ++k) s[Eigen::Index(k) - 1] = double(k * (n - k)) / 2.0;
  return s;
}

inline double mu0(std::size_t n) {
  if (n < 2) return 0.0;
  return 12.0 / double((n + 1) * n * (n - 1));
}

struct CriticalPoint {
  double lambda_cr = 1.0;
  Eigen::VectorXd z_cr;
};

inline CriticalPoint critical_point(std::size_t n) {
  if (n < 2) return {};
  const Eigen::VectorXd s = sigma(n);
  const double m = mu0(n);
  double sls = 0.0;
  for (Eigen::Index k = 0; k < s.size(); ++k) sls += s[k] * std::log(s[k]);
  CriticalPoint c;
  c.lambda_cr = std::exp(-m * sls);
  c.z_cr.resize(s.size());
  for (Eigen::Index k = 0; k < s.size(); ++k) c.z_cr[k] = -std::log(c.lambda_cr * s[k]);
  return c;
}

// Linearization of the Toda forces around the parabolic motion (times t^2).
inline Eigen::MatrixXd interaction_matrix(std::size_t n) {
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(Eigen::Index(n), Eigen::Index(n));
  for (std::size_t k = 1; k < n; ++k) {
    const double c = -double(k * (n - k));
    const auto i = Eigen::Index(k) - 1;
    u(i, i + 1) = u(i + 1, i) = c;
    u(i, i) -= c;
    u(i + 1, i + 1) -= c;
  }
  return u;
}

// Orthonormal P_0..P_{n-1}: Gram-Schmidt on monomials in k, in long double.
// Centering the monomials at (n-1)/2 spans the same flags and is much better
// conditioned than 0^l, 1^l, ..., (n-1)^l.
inline std::vector<Eigen::VectorXd> legendre_vectors(std::size_t n) {
  using ld = long double;
  std::vector<std::vector<ld>> basis;
  const ld mid = (ld(n) - 1) / 2;
  for (std::size_t l = 0; l < n; ++l) {
    std::vector<ld> v(n);
    for (std::size_t k = 0; k < n; ++k) v[k] = std::pow(ld(k) - mid, ld(l));
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& b : basis) {
        ld d = 0;
        for (std::size_t k = 0; k < n; ++k) d += v[k] * b[k];
        for (std::size_t k = 0; k < n; ++k) v[k] -= d * b[k];
      }
    }
    ld nrm = 0;
    for (ld x : v) nrm += x * x;
    nrm = std::sqrt(nrm);
    for (ld& x : v) x /= nrm;
    // Fix the sign so the last entry is positive.
    if (v[n - 1] < 0) {
      for (ld& x : v) x = -x;
    }
    basis.push_back(v);
  }
  std::vector<Eigen::VectorXd> out;
  for (const auto& b : basis) {
    Eigen::VectorXd e(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) e[Eigen::Index(k)] = double(b[k]);
    out.push_back(e);
  }
  return out;
}

struct SpectralData {
  std::size_t n = 0;
  Eigen::MatrixXd laplacian;
  Eigen::VectorXd sigma;
  double mu0 = 0.0;
  Eigen::VectorXd z_cr;
  double lambda_cr = 1.0;
  Eigen::MatrixXd interaction;
  std::vector<Eigen::VectorXd> legendre;
  double A = 0.0;  // kappa sqrt(2 / M)
};

inline SpectralData spectral_data(std::size_t n, double mass, double kappa) {
  SpectralData d;
  d.n = n;
  d.laplacian = dirichlet_laplacian(n);
  d.sigma = sigma(n);
  d.mu0 = mu0(n);
  const CriticalPoint c = critical_point(n);
  d.lambda_cr = c.lambda_cr;
  d.z_cr = c.z_cr;
  d.interaction = interaction_matrix(n);
  d.legendre = legendre_vectors(n);
  d.A = kappa * std::sqrt(2.0) / std::sqrt(mass);
  return d;
}

// A point on the parabolic manifold near explicit_parabolic(t0): the bounded
// linear modes delta_l (t0/t)^l P_l are imposed at a far time t_far and the
// exact flow is run back to t0.  Backwards, the growing modes decay, so the
// result carries no escape-breaking component beyond integration error.
inline TodaState parabolic_perturbation(std::size_t n, double mass, double kappa, double t0,
                                        const std::vector<double>& delta, double t_far,
                                        const TodaOptions& opt = {}) {
  TodaState s = explicit_parabolic(n, mass, kappa, t_far);
  const auto P = legendre_vectors(n);
  for (std::size_t l = 0; l < n && l < delta.size(); ++l) {
    const double decay = std::pow(t0 / t_far, double(l));
    for (std::size_t k = 0; k < n; ++k) {
      s.a[k] += delta[l] * decay * P[l][Eigen::Index(k)];
      s.p[k] += mass * (-double(l) * delta[l] * decay / t_far) * P[l][Eigen::Index(k)];
    }
  }
  return integrate_backward(s, t0, opt);
}

// ---- Euler equations b' = w + f, w' = l(l+1) (t0+t)^{-2} b + g -----------

struct EulerMode {
  int l = 0;
  double t0 = 1.0;
  double b0 = 0.0;
  std::function<double(double)> f, g;

  // Particular solution pieces I1(t) = int_0^t, I2(t) = int_t^inf.
  std::pair<double, double> integrals(double t) const {
    using boost::math::quadrature::exp_sinh;
    using boost::math::quadrature::gauss_kronrod;
    const double L = l;
    auto inner = [&](double s) {
      const double ts = t0 + s;
      return (L + 1) * std::pow(ts, L) * f(s) - std::pow(ts, L + 1) * g(s);
    };
    auto outer = [&](double s) {
      const double ts = t0 + s;
      return -L * std::pow(ts, -L - 1) * f(s) - std::pow(ts, -L) * g(s);
    };
    double i1 = 0.0;
    if (t > 0) i1 = gauss_kronrod<double, 61>::integrate(inner, 0.0, t, 12, 1e-12);
    exp_sinh<double> es;
    const double i2 =
        es.integrate([&](double u) { return outer(t + u); }, 0.0,
                     std::numeric_limits<double>::infinity(), 1e-12);
    return {i1, i2};
  }

  std::pair<double, double> particular(double t) const {
    const double L = l, tau = t0 + t;
    auto [i1, i2] = integrals(t);
    const double bp = (std::pow(tau, -L) * i1 + std::pow(tau, L + 1) * i2) / (2 * L + 1);
    const double wp =
        (-L * std::pow(tau, -L - 1) * i1 + (L + 1) * std::pow(tau, L) * i2) / (2 * L + 1);
    return {bp, wp};
  }

  // (b(t), w(t)) of the unique bounded solution with b(0) = b0.
  std::pair<double, double> operator()(double t) const {
    const double L = l, tau = t0 + t;
    auto [bp, wp] = particular(t);
    const double bp0 = particular(0.0).first;
    const double c = std::pow(t0, L) * (b0 - bp0);
    return {c * std::pow(tau, -L) + bp, -L * c * std::pow(tau, -L - 1) + wp};
  }
};

struct EulerSolution {
  std::size_t n = 0;
  double t0 = 1.0;
  std::vector<Eigen::VectorXd> legendre;
  std::vector<EulerMode> modes;

  // B(t), W(t) assembled from the modes.
  std::pair<Eigen::VectorXd, Eigen::VectorXd> operator()(double t) const {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(Eigen::Index(n)), w = b;
    for (std::size_t l = 0; l < n; ++l) {
      auto [bl, wl] = modes[l](t);
      b += bl * legendre[l];
      w += wl * legendre[l];
    }
    return {b, w};
  }
};

using VectorForcing = std::function<Eigen::VectorXd(double)>;

// Bounded solution of B' = W + F, W' = (t0+t)^{-2} U B + G with B(0) = B0,
// solved mode by mode in the Legendre basis.
inline EulerSolution euler_solve(std::size_t n, double t0, const Eigen::VectorXd& B0,
                                 const VectorForcing& F, const VectorForcing& G) {
  if (!(t0 > 0)) throw PreconditionError("euler_solve needs t0 > 0");
  if (B0.size() != Eigen::Index(n)) throw PreconditionError("B0 has the wrong size");
  // Sampled tail check: tau^2 |G| bounded and tau |F| decaying.
  auto norm_at = [](const VectorForcing& h, double t) { return h ? h(t).norm() : 0.0; };
  const double tiny = 1e-300;
  const double g_lo = std::pow(t0 + 1e2, 2) * norm_at(G, 1e2);
  const double g_hi = std::pow(t0 + 1e5, 2) * norm_at(G, 1e5);
  const double f_lo = (t0 + 1e2) * norm_at(F, 1e2);
  const double f_hi = (t0 + 1e5) * norm_at(F, 1e5);
  if (!std::isfinite(g_hi) || g_hi > 10.0 * g_lo + tiny) {
    throw InadmissibleForcing("G does not decay like (t0+t)^{-2}");
  }
  if (!std::isfinite(f_hi) || f_hi > 0.1 * f_lo + tiny) {
    throw InadmissibleForcing("F is not integrable on [0, inf)");
  }

  EulerSolution sol;
  sol.n = n;
  sol.t0 = t0;
  sol.legendre = legendre_vectors(n);
  for (std::size_t l = 0; l < n; ++l) {
    EulerMode m;
    m.l = int(l);
    m.t0 = t0;
    const Eigen::VectorXd P = sol.legendre[l];
    m.b0 = P.dot(B0);
    m.f = F ? std::function<double(double)>([F, P](double t) { return P.dot(F(t)); })
            : [](double) { return 0.0; };
    m.g = G ? std::function<double(double)>([G, P](double t) { return P.dot(G(t)); })
            : [](double) { return 0.0; };
    sol.modes.push_back(std::move(m));
  }
  return sol;
}

}  // namespace kinkclusters
