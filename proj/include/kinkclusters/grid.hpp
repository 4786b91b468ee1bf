#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "kinkclusters/errors.hpp"

namespace kinkclusters {

struct Grid {
  double x_left = -1.0;
  double x_right = 1.0;
  int n_cells = 64;

  Grid() = default;
  Grid(double xl, double xr, int cells) : x_left(xl), x_right(xr), n_cells(cells) {
    if (!(xr > xl)) throw PreconditionError("grid needs x_right > x_left");
    if (cells < 64) throw PreconditionError("grid needs at least 64 cells");
  }

  // Grid with spacing as close to `dx` as possible (never larger).
  static Grid with_spacing(double xl, double xr, double dx) {
    return Grid(xl, xr, std::max(64, int(std::ceil((xr - xl) / dx - 1e-9))));
  }

  double dx() const { return (x_right - x_left) / n_cells; }
  std::size_t nodes() const { return std::size_t(n_cells) + 1; }
  double x(std::size_t i) const { return x_left + double(i) * dx(); }
};

struct FieldState {
  Grid grid;
  std::vector<double> phi;
  std::vector<double> phidot;
  double time = 0.0;
  std::pair<int, int> sector{1, 1};

  FieldState() = default;
  explicit FieldState(const Grid& g)
      : grid(g), phi(g.nodes(), 0.0), phidot(g.nodes(), 0.0) {}
};

// Composite Simpson on uniformly spaced samples.  An odd number of cells is
// handled with a 3/8 rule on the last three.
inline double simpson(const double* f, std::size_t n, double h) {
  if (n < 2) return 0.0;
  if (n == 2) return 0.5 * h * (f[0] + f[1]);
  const std::size_t cells = n - 1;
  std::size_t m = cells % 2 == 0 ? cells : cells - 3;
  double s = 0.0;
  if (m > 0) {
    double acc = f[0] + f[m];
    for (std::size_t i = 1; i < m; ++i) acc += (i % 2 ? 4.0 : 2.0) * f[i];
    s = acc * h / 3.0;
  }
  if (m != cells) {
    s += 3.0 * h / 8.0 * (f[m] + 3.0 * f[m + 1] + 3.0 * f[m + 2] + f[m + 3]);
  }
  return s;
}

inline double simpson(const std::vector<double>& f, double h) {
  return simpson(f.data(), f.size(), h);
}

// d/dx by fourth-order central differences, second order next to the
// boundary and one-sided second order at the end nodes.
inline std::vector<double> derivative(const std::vector<double>& f, double h) {
  const std::size_t n = f.size();
  std::vector<double> d(n, 0.0);
  if (n < 5) throw PreconditionError("derivative needs at least 5 samples");
  d[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * h);
  d[n - 1] = (3 * f[n - 1] - 4 * f[n - 2] + f[n - 3]) / (2 * h);
  d[1] = (f[2] - f[0]) / (2 * h);
  d[n - 2] = (f[n - 1] - f[n - 3]) / (2 * h);
  for (std::size_t i = 2; i + 2 < n; ++i) {
    d[i] = (f[i - 2] - 8 * f[i - 1] + 8 * f[i + 1] - f[i + 2]) / (12 * h);
  }
  return d;
}

}  // namespace kinkclusters
