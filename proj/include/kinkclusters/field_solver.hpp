#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "kinkclusters/errors.hpp"
#include "kinkclusters/grid.hpp"
#include "kinkclusters/multikink.hpp"
#include "kinkclusters/potential.hpp"

namespace kinkclusters {

// Largest dt / dx accepted by step().  The fourth-order Laplacian has
// spectral radius 16/(3 dx^2), so leapfrog needs dt <= (sqrt(3)/2) dx ~ 0.866 dx.
inline constexpr double kCourantLimit = 0.85;

namespace detail {

// out = phi_xx - U'(phi) on interior nodes; fourth order except next to the
// pinned boundary nodes, where the three-point stencil is used.
inline void acceleration(const Potential& p, const std::vector<double>& phi,
                         double dx, std::vector<double>& out) {
  const std::size_t n = phi.size();
  const double c2 = 1.0 / (dx * dx);
  const double c4 = 1.0 / (12.0 * dx * dx);
  out[0] = 0.0;
  out[n - 1] = 0.0;
  out[1] = (phi[0] - 2 * phi[1] + phi[2]) * c2 - p.du(phi[1]);
  out[n - 2] = (phi[n - 3] - 2 * phi[n - 2] + phi[n - 1]) * c2 - p.du(phi[n - 2]);
  for (std::size_t i = 2; i + 2 < n; ++i) {
    const double lap = (-phi[i - 2] + 16 * phi[i - 1] - 30 * phi[i] +
                        16 * phi[i + 1] - phi[i + 2]) * c4;
    out[i] = lap - p.du(phi[i]);
  }
}

inline void check_courant(const FieldState& s, double dt) {
  if (!(dt > 0.0) || dt > kCourantLimit * s.grid.dx() * (1 + 1e-12)) {
    throw PreconditionError("time step violates dt <= 0.85 dx");
  }
}

// One Stormer-Verlet step in place; `acc` is scratch of the state's size.
inline void leapfrog(const Potential& p, FieldState& s, double dt,
                     std::vector<double>& acc) {
  const std::size_t n = s.phi.size();
  const double dx = s.grid.dx();
  acceleration(p, s.phi, dx, acc);
  for (std::size_t i = 1; i + 1 < n; ++i) s.phidot[i] += 0.5 * dt * acc[i];
  for (std::size_t i = 1; i + 1 < n; ++i) s.phi[i] += dt * s.phidot[i];
  acceleration(p, s.phi, dx, acc);
  for (std::size_t i = 1; i + 1 < n; ++i) s.phidot[i] += 0.5 * dt * acc[i];
  s.phi[0] = s.sector.first;
  s.phi[n - 1] = s.sector.second;
  s.phidot[0] = 0.0;
  s.phidot[n - 1] = 0.0;
  s.time += dt;
}

inline bool blown_up(const FieldState& s) {
  for (std::size_t i = 0; i < s.phi.size(); ++i) {
    if (!std::isfinite(s.phi[i]) || !std::isfinite(s.phidot[i]) ||
        std::abs(s.phi[i]) > 3.0) {
      return true;
    }
  }
  return false;
}

}  // namespace detail

inline FieldState step(const Potential& p, const FieldState& s, double dt) {
  detail::check_courant(s, dt);
  FieldState out = s;
  std::vector<double> acc(s.phi.size());
  detail::leapfrog(p, out, dt, acc);
  return out;
}

inline FieldState time_reverse(FieldState s) {
  for (double& v : s.phidot) v = -v;
  return s;
}

inline double discrete_energy(const Potential& p, const FieldState& s) {
  return total_energy(p, s).value;
}

// Energy in [x0, x1]; the window is snapped inward to grid nodes.
inline double local_energy(const Potential& p, const FieldState& s, double x0,
                           double x1) {
  const Grid& g = s.grid;
  if (x0 < g.x_left - 1e-12 || x1 > g.x_right + 1e-12 || !(x1 > x0)) {
    throw DomainError("local_energy window outside the grid");
  }
  const double dx = g.dx();
  auto i0 = std::size_t(std::max(0.0, std::ceil((x0 - g.x_left) / dx - 1e-9)));
  auto i1 = std::min(g.nodes() - 1,
                     std::size_t(std::floor((x1 - g.x_left) / dx + 1e-9)));
  const std::vector<double> e = energy_density(p, s);
  if (i1 <= i0) return 0.0;
  return simpson(e.data() + i0, i1 - i0 + 1, dx);
}

// Longest run for which boundary effects cannot reach the kinks.
inline double safe_window(const Grid& g, const MultikinkConfig& cfg) {
  if (cfg.n() == 0) return g.x_right - g.x_left;
  return std::min(cfg.a.front() - g.x_left, g.x_right - cfg.a.back()) - 5.0;
}

using Observer = std::function<std::vector<double>(const FieldState&)>;

struct RunRecord {
  std::vector<double> times;
  std::vector<double> energies;
  std::vector<std::vector<double>> observations;
  FieldState final_state;
};

// Advances s to t_final.  The step is shrunk slightly so that t_final is hit
// exactly; samples (energy plus observer output) are taken at the start and
// then every round(sample_interval / dt) steps, and at the end.
inline RunRecord evolve(const Potential& p, FieldState s, double t_final,
                        double dt, double sample_interval,
                        const Observer& observer = {}) {
  detail::check_courant(s, dt);
  if (sample_interval < dt * (1 - 1e-12)) {
    throw PreconditionError("sample interval shorter than the time step");
  }
  if (std::abs(s.phi.front() - s.sector.first) > 1e-6 ||
      std::abs(s.phi.back() - s.sector.second) > 1e-6) {
    throw PreconditionError("state is not at its vacua on the boundary");
  }
  const double span = t_final - s.time;
  const long steps = span > 0 ? long(std::ceil(span / dt - 1e-9)) : 0;
  const double h = steps > 0 ? span / double(steps) : dt;
  const long every = std::max(1L, long(std::lround(sample_interval / h)));

  RunRecord rec;
  auto sample = [&] {
    rec.times.push_back(s.time);
    rec.energies.push_back(total_energy(p, s).value);
    if (observer) rec.observations.push_back(observer(s));
  };
  const double t0 = s.time;
  sample();
  std::vector<double> acc(s.phi.size());
  for (long k = 1; k <= steps; ++k) {
    const double last_good = s.time;
    detail::leapfrog(p, s, h, acc);
    s.time = t0 + double(k) * h;
    if (detail::blown_up(s)) {
      throw BlowUpDetected("field blew up (NaN or |phi| > 3)", last_good);
    }
    if (k % every == 0 || k == steps) sample();
  }
  rec.final_state = std::move(s);
  return rec;
}

}  // namespace kinkclusters
