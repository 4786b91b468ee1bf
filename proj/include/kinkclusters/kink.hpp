#pragma once

#include <array>
#include <cmath>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/numeric/odeint.hpp>

#include "kinkclusters/errors.hpp"
#include "kinkclusters/grid.hpp"
#include "kinkclusters/potential.hpp"

namespace kinkclusters {

namespace detail {

// 1/sqrt(2U(y)) - 1/(1-y) on [0, 1].  Finite at y = 1 because U''(1) = 1;
// the limit there is U'''(1)/6.
inline double regular_part(const Potential& p, double y) {
  const double w = 1.0 - y;
  if (w < 1e-6) return p.d3u(1.0) / 6.0;
  return 1.0 / std::sqrt(2.0 * p.u(y)) - 1.0 / w;
}

inline double integrate_regular(const Potential& p, double upper) {
  using boost::math::quadrature::gauss_kronrod;
  double err = 0.0;
  const double val = gauss_kronrod<double, 61>::integrate(
      [&p](double y) { return regular_part(p, y); }, 0.0, upper, 20, 1e-14,
      &err);
  if (!std::isfinite(val) || err > 1e-10 * (1.0 + std::abs(val))) {
    throw ToleranceFailure("quadrature of the Bogomolny integrand did not converge");
  }
  return val;
}

}  // namespace detail

// G(psi) = int_0^psi dy / sqrt(2U(y)); the inverse of the kink profile.
inline double bogomolny_coordinate(const Potential& p, double psi) {
  if (!(std::abs(psi) < 1.0)) {
    throw DomainError("bogomolny_coordinate needs |psi| < 1");
  }
  if (psi == 0.0) return 0.0;
  const double a = std::abs(psi);
  const double g = -std::log1p(-a) + detail::integrate_regular(p, a);
  return psi < 0 ? -g : g;
}

// kappa = exp(int_0^1 (1/sqrt(2U) - 1/(1-y)) dy), so 1 - H(x) ~ kappa e^{-x}.
inline double interaction_constant(const Potential& p) {
  return std::exp(detail::integrate_regular(p, 1.0));
}

struct KinkProfile {
  Potential potential;
  double x_max = 0.0;
  double dx = 0.0;
  std::vector<double> x, h, dh;
  double kappa = 0.0;
  double mass = 0.0;

  double H(double s) const {
    const double a = std::abs(s);
    if (a > x_max) {
      const double t = 1.0 - kappa * std::exp(-a);
      return s < 0 ? -t : t;
    }
    std::size_t i;
    double t, hh;
    locate(s, i, t, hh);
    return hermite(h[i], dh[i], h[i + 1], dh[i + 1], t, hh);
  }

  double dH(double s) const {
    const double a = std::abs(s);
    if (a > x_max) return kappa * std::exp(-a);
    std::size_t i;
    double t, hh;
    locate(s, i, t, hh);
    return hermite(dh[i], potential.du(h[i]), dh[i + 1],
                   potential.du(h[i + 1]), t, hh);
  }

  // Higher derivatives through the profile equation H'' = U'(H).
  double d2H(double s) const { return potential.du(H(s)); }
  double d3H(double s) const { return potential.d2u(H(s)) * dH(s); }

 private:
  void locate(double s, std::size_t& i, double& t, double& hh) const {
    double q = (s + x_max) / dx;
    auto k = static_cast<long>(std::floor(q));
    if (k < 0) k = 0;
    if (k > long(x.size()) - 2) k = long(x.size()) - 2;
    i = std::size_t(k);
    t = q - double(k);
    hh = dx;
  }

  static double hermite(double f0, double d0, double f1, double d1, double t,
                        double hh) {
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * f0 + (t3 - 2 * t2 + t) * hh * d0 +
           (-2 * t3 + 3 * t2) * f1 + (t3 - t2) * hh * d1;
  }
};

// M computed three ways; throws ConsistencyError if they disagree by > 1e-8.
inline double rest_mass(const KinkProfile& prof) {
  const Potential& p = prof.potential;
  using boost::math::quadrature::gauss_kronrod;
  double err = 0.0;
  const double m_bogo =
      2.0 * gauss_kronrod<double, 61>::integrate(
                [&p](double y) { return std::sqrt(2.0 * p.u(y)); }, 0.0, 1.0,
                20, 1e-14, &err);

  const std::size_t n = prof.x.size();
  std::vector<double> kin(n), pot(n);
  for (std::size_t i = 0; i < n; ++i) {
    kin[i] = prof.dh[i] * prof.dh[i];
    pot[i] = 2.0 * p.u(prof.h[i]);
  }
  // Both tails beyond the table contribute kappa^2 e^{-2 x_max} in total.
  const double tail = prof.kappa * prof.kappa * std::exp(-2.0 * prof.x_max);
  const double m_kin = simpson(kin, prof.dx) + tail;
  const double m_pot = simpson(pot, prof.dx) + tail;

  const double spread = std::max({std::abs(m_bogo - m_kin),
                                  std::abs(m_bogo - m_pot),
                                  std::abs(m_kin - m_pot)});
  if (spread > 1e-8) {
    throw ConsistencyError("rest mass estimates disagree by " +
                           std::to_string(spread));
  }
  return m_bogo;
}

// Tabulates H on [-x_max, x_max] with n_points cells (rounded up to even so
// that x = 0 is a node).  x >= 0 is integrated in w = 1 - H, which keeps the
// tail accurate; x < 0 follows by oddness.
inline KinkProfile build_profile(const Potential& p, double x_max = 15.0,
                                 int n_points = 4096) {
  if (x_max < 10.0) throw PreconditionError("build_profile needs x_max >= 10");
  if (n_points < 512) throw PreconditionError("build_profile needs n_points >= 512");
  const int half = (n_points + 1) / 2;

  KinkProfile prof;
  prof.potential = p;
  prof.x_max = x_max;
  prof.dx = x_max / half;
  const std::size_t n = 2 * std::size_t(half) + 1;
  prof.x.resize(n);
  prof.h.resize(n);
  prof.dh.resize(n);
  for (std::size_t i = 0; i < n; ++i) prof.x[i] = -x_max + double(i) * prof.dx;

  using state = std::array<double, 1>;
  namespace odeint = boost::numeric::odeint;
  std::vector<double> times(std::size_t(half) + 1);
  for (int i = 0; i <= half; ++i) times[i] = i * prof.dx;
  std::vector<double> w_at(times.size(), 1.0);

  auto rhs = [&p](const state& w, state& dw, double) {
    dw[0] = -std::sqrt(2.0 * p.u(1.0 - w[0]));
  };
  state w0{1.0};
  std::size_t k = 0;
  auto stepper = odeint::make_dense_output(1e-15, 1e-13,
                                           odeint::runge_kutta_dopri5<state>());
  odeint::integrate_times(stepper, rhs, w0, times.begin(), times.end(),
                          prof.dx / 4,
                          [&](const state& w, double) { w_at[k++] = w[0]; });

  for (int i = 0; i <= half; ++i) {
    const double w = w_at[i];
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw IntegrationStall("profile integration stalled", times[i]);
    }
    const double hv = 1.0 - w;
    const double dv = std::sqrt(2.0 * p.u(hv));
    if (i > 0 && !(dv > 0.0)) {
      throw IntegrationStall("U(H) underflowed before reaching x_max",
                             times[i - 1]);
    }
    prof.h[half + i] = hv;
    prof.dh[half + i] = dv;
    prof.h[half - i] = -hv;
    prof.dh[half - i] = dv;
  }
  prof.h[half] = 0.0;

  prof.kappa = interaction_constant(p);
  prof.mass = rest_mass(prof);
  return prof;
}

// (H(gamma(x-a)), -v gamma H'(gamma(x-a))): the kink boosted to speed v.
inline std::pair<double, double> eval_boosted(const KinkProfile& prof, double a,
                                              double v, double x) {
  const double g = 1.0 / std::sqrt(1.0 - v * v);
  const double s = g * (x - a);
  return {prof.H(s), -v * g * prof.dH(s)};
}

// Fits 1 - H(x) = K e^{-x} - c e^{-2x} on x in [lo, hi] by least squares and
// returns K.  The second term is needed: without it the fit is biased by
// O(e^{-lo}).
inline double fit_tail_kappa(const KinkProfile& prof, double lo = 5.0,
                             double hi = 8.0) {
  double s1 = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < prof.x.size(); ++i) {
    const double x = prof.x[i];
    if (x < lo - 1e-12 || x > hi + 1e-12) continue;
    const double u = std::exp(-x);
    const double y = (1.0 - prof.h[i]) * std::exp(x);
    s1 += 1;
    sx += u;
    sy += y;
    sxx += u * u;
    sxy += u * y;
  }
  const double slope = (s1 * sxy - sx * sy) / (s1 * sxx - sx * sx);
  return (sy - slope * sx) / s1;
}

struct IdentityReport {
  double reduced_force = 0.0;         // int H'(U''(H)-1) e^x dx
  double reduced_force_target = 0.0;  // -2 kappa
  double zero_mode_residual = 0.0;    // max |L H'| on the table
  double asymptotic_slope = 0.0;      // fitted log-slope of the 2nd order residual
  double kappa_tail_fit = 0.0;
};

inline IdentityReport check_identities(const KinkProfile& prof) {
  if (prof.x_max < 10.0) throw PreconditionError("check_identities needs x_max >= 10");
  const Potential& p = prof.potential;
  const std::size_t n = prof.x.size();
  IdentityReport r;
  r.reduced_force_target = -2.0 * prof.kappa;

  std::vector<double> f(n);
  for (std::size_t i = 0; i < n; ++i) {
    f[i] = prof.dh[i] * (p.d2u(prof.h[i]) - 1.0) * std::exp(prof.x[i]);
  }
  // Beyond x_max the integrand is -U'''(1) kappa^2 e^{-x} to leading order;
  // the left tail decays like e^{3x} and is dropped.
  r.reduced_force = simpson(f, prof.dx) -
                    p.d3u(1.0) * prof.kappa * prof.kappa * std::exp(-prof.x_max);

  const double h2 = prof.dx * prof.dx;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double lap = (prof.dh[i + 1] - 2 * prof.dh[i] + prof.dh[i - 1]) / h2;
    r.zero_mode_residual = std::max(
        r.zero_mode_residual, std::abs(-lap + p.d2u(prof.h[i]) * prof.dh[i]));
  }

  const double c2 = prof.kappa * prof.kappa * p.d3u(1.0) / 6.0;
  const double hi = std::min(8.0, prof.x_max - 2.0);
  double s1 = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = prof.x[i];
    if (x < 3.0 - 1e-12 || x > hi + 1e-12) continue;
    const double res = -(1.0 - prof.h[i]) + prof.kappa * std::exp(-x) -
                       c2 * std::exp(-2.0 * x);
    const double y = std::log(std::abs(res));
    s1 += 1;
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  r.asymptotic_slope = (s1 * sxy - sx * sy) / (s1 * sxx - sx * sx);
  r.kappa_tail_fit = fit_tail_kappa(prof);
  return r;
}

}  // namespace kinkclusters
