#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "kinkclusters/errors.hpp"
#include "kinkclusters/grid.hpp"
#include "kinkclusters/kink.hpp"

namespace kinkclusters {

// n alternating kinks: k = 1 is an antikink, k = 2 a kink, and so on, so the
// field starts at the vacuum +1 and ends at (-1)^n.
struct MultikinkConfig {
  std::vector<double> a;
  std::vector<double> v;

  MultikinkConfig() = default;
  MultikinkConfig(std::vector<double> pos, std::vector<double> vel)
      : a(std::move(pos)), v(std::move(vel)) {
    if (v.empty()) v.assign(a.size(), 0.0);
    check();
  }

  std::size_t n() const { return a.size(); }

  std::vector<double> gaps() const {
    std::vector<double> y;
    for (std::size_t k = 1; k < a.size(); ++k) y.push_back(a[k] - a[k - 1]);
    return y;
  }

  double y_min() const {
    double m = std::numeric_limits<double>::infinity();
    for (double y : gaps()) m = std::min(m, y);
    return m;
  }

  void check() const {
    if (v.size() != a.size()) {
      throw PreconditionError("positions and velocities differ in length");
    }
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (k > 0 && a[k] < a[k - 1]) {
        throw PreconditionError("multikink positions must be ascending");
      }
      if (!(std::abs(v[k]) < 1.0)) {
        throw PreconditionError("multikink velocities must satisfy |v| < 1");
      }
    }
  }
};

// (-1)^k for the 1-based kink index k.
inline double kink_sign(std::size_t k) { return k % 2 ? -1.0 : 1.0; }

inline double lorentz_gamma(double v) { return 1.0 / std::sqrt(1.0 - v * v); }

// Samples H(a, v) = 1 + sum_k (-1)^k (H_k + 1) on the grid.
inline FieldState synthesize(const KinkProfile& prof, const MultikinkConfig& cfg,
                             const Grid& grid, double time = 0.0) {
  cfg.check();
  const std::size_t n = cfg.n();
  if (n > 0 && (grid.x_left > cfg.a.front() - 8.0 || grid.x_right < cfg.a.back() + 8.0)) {
    throw CoverageError("grid does not cover [a_1 - 8, a_n + 8]");
  }
  FieldState s(grid);
  s.time = time;
  s.sector = {1, n % 2 ? -1 : 1};
  for (std::size_t i = 0; i < grid.nodes(); ++i) {
    const double x = grid.x(i);
    double phi = 1.0, phidot = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      auto [h, hd] = eval_boosted(prof, cfg.a[k], cfg.v[k], x);
      const double sg = kink_sign(k + 1);
      phi += sg * (h + 1.0);
      phidot += sg * hd;
    }
    s.phi[i] = phi;
    s.phidot[i] = phidot;
  }
  return s;
}

inline double proximity(const MultikinkConfig& cfg) {
  double rho = 0.0;
  for (double y : cfg.gaps()) rho += std::exp(-y);
  for (double v : cfg.v) rho += v * v;
  return rho;
}

// A quadrature result that may be polluted by the domain truncation.
struct Measured {
  double value = 0.0;
  bool truncation_warning = false;
};

inline std::vector<double> energy_density(const Potential& p, const FieldState& s) {
  const std::vector<double> dphi = derivative(s.phi, s.grid.dx());
  std::vector<double> e(s.phi.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    e[i] = 0.5 * s.phidot[i] * s.phidot[i] + 0.5 * dphi[i] * dphi[i] + p.u(s.phi[i]);
  }
  return e;
}

inline Measured total_energy(const Potential& p, const FieldState& s) {
  const std::vector<double> e = energy_density(p, s);
  return {simpson(e, s.grid.dx()), std::max(e.front(), e.back()) > 1e-10};
}

inline Measured total_momentum(const FieldState& s) {
  const std::vector<double> dphi = derivative(s.phi, s.grid.dx());
  std::vector<double> m(s.phi.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = -s.phidot[i] * dphi[i];
  const std::size_t last = m.size() - 1;
  const double edge = std::max(
      0.5 * (s.phidot[0] * s.phidot[0] + dphi[0] * dphi[0]),
      0.5 * (s.phidot[last] * s.phidot[last] + dphi[last] * dphi[last]));
  return {simpson(m, s.grid.dx()), edge > 1e-10};
}

// F_k = (-1)^k <dH(a_k, v_k), U'(H(a, v)) - sum_j (-1)^j U'(H_j)>, by
// Simpson on a private grid reaching 40 units past the outer kinks.
inline double interaction_force(const KinkProfile& prof, const MultikinkConfig& cfg,
                                std::size_t k, double dx = 0.01) {
  cfg.check();
  const std::size_t n = cfg.n();
  if (k < 1 || k > n) throw PreconditionError("force index out of range");
  const Potential& p = prof.potential;
  const Grid g = Grid::with_spacing(cfg.a.front() - 40.0, cfg.a.back() + 40.0, dx);
  std::vector<double> f(g.nodes());
  std::vector<double> gam(n);
  for (std::size_t j = 0; j < n; ++j) gam[j] = lorentz_gamma(cfg.v[j]);
  for (std::size_t i = 0; i < g.nodes(); ++i) {
    const double x = g.x(i);
    double total = 1.0, self = 0.0, dk = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double s = gam[j] * (x - cfg.a[j]);
      const double h = prof.H(s);
      const double sg = kink_sign(j + 1);
      total += sg * (h + 1.0);
      self += sg * p.du(h);
      if (j + 1 == k) dk = gam[j] * prof.dH(s);
    }
    if (std::abs(total) > 2.0) {
      throw PreconditionError("multikink leaves [-2, 2]; proximity too large");
    }
    f[i] = dk * (p.du(total) - self);
  }
  return kink_sign(k) * simpson(f, g.dx());
}

// 2 kappa^2 (e^{-y_k} - e^{-y_{k-1}}) with y_0 = y_n = infinity.
inline double force_asymptotic(double kappa, const MultikinkConfig& cfg, std::size_t k) {
  const std::size_t n = cfg.n();
  if (k < 1 || k > n) throw PreconditionError("force index out of range");
  double f = 0.0;
  if (k < n) f += std::exp(-(cfg.a[k] - cfg.a[k - 1]));
  if (k > 1) f -= std::exp(-(cfg.a[k - 1] - cfg.a[k - 2]));
  return 2.0 * kappa * kappa * f;
}

// n M + M/2 |v|^2 - 2 kappa^2 sum e^{-y_k}
inline double energy_expansion(double kappa, double mass, const MultikinkConfig& cfg) {
  double e = double(cfg.n()) * mass;
  for (double v : cfg.v) e += 0.5 * mass * v * v;
  for (double y : cfg.gaps()) e -= 2.0 * kappa * kappa * std::exp(-y);
  return e;
}

}  // namespace kinkclusters
