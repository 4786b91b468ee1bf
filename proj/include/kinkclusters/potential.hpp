#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "kinkclusters/errors.hpp"

namespace kinkclusters {

// Even double-well potential U with vacua at +-1 and U''(+-1) = 1.
// Immutable once built; copies share the underlying callables.
struct Potential {
  std::string name;
  std::function<double(double)> u;
  std::function<double(double)> du;
  std::function<double(double)> d2u;
  std::function<double(double)> d3u;
};

namespace detail {

inline Potential phi4() {
  Potential p;
  p.name = "phi4";
  // (1-phi)(1+phi) keeps full relative precision near the vacua.
  p.u = [](double f) {
    const double w = (1.0 - f) * (1.0 + f);
    return 0.125 * w * w;
  };
  p.du = [](double f) { return -0.5 * f * (1.0 - f) * (1.0 + f); };
  p.d2u = [](double f) { return 0.5 * (3.0 * f * f - 1.0); };
  p.d3u = [](double f) { return 3.0 * f; };
  return p;
}

inline Potential sine_gordon() {
  using std::numbers::pi;
  Potential p;
  p.name = "sine_gordon";
  // Written in terms of the distance u = 1 - |phi| to the nearest vacuum so
  // that U, U' stay accurate in the kink tails.
  p.u = [](double f) {
    const double s = std::sin(0.5 * pi * (1.0 - std::abs(f)));
    return 2.0 / (pi * pi) * s * s;
  };
  p.du = [](double f) {
    const double sg = f < 0 ? -1.0 : 1.0;
    return -sg * std::sin(pi * (1.0 - std::abs(f))) / pi;
  };
  p.d2u = [](double f) { return std::cos(pi * (1.0 - std::abs(f))); };
  p.d3u = [](double f) {
    const double sg = f < 0 ? -1.0 : 1.0;
    return pi * sg * std::sin(pi * (1.0 - std::abs(f)));
  };
  return p;
}

// Cubic Hermite interpolation on a sorted, not necessarily uniform, table.
struct HermiteTable {
  std::vector<double> x, f, df;

  double operator()(double t) const {
    if (t < x.front() || t > x.back()) {
      throw DomainError("tabulated potential evaluated outside its table");
    }
    auto it = std::upper_bound(x.begin(), x.end(), t);
    std::size_t i = it == x.begin() ? 0 : std::size_t(it - x.begin()) - 1;
    if (i + 1 >= x.size()) i = x.size() - 2;
    const double h = x[i + 1] - x[i];
    const double s = (t - x[i]) / h;
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * f[i] + (s3 - 2 * s2 + s) * h * df[i] +
           (-2 * s3 + 3 * s2) * f[i + 1] + (s3 - s2) * h * df[i + 1];
  }
};

}  // namespace detail

// Built-in models: "phi4" and "sine_gordon".
inline Potential builtin(std::string_view id) {
  if (id == "phi4") return detail::phi4();
  if (id == "sine_gordon") return detail::sine_gordon();
  throw UnsupportedModel("unknown potential '" + std::string(id) + "'");
}

// Potential from columns (phi, U, U', U'', U''').  Each function is a cubic
// Hermite interpolant that uses the next column as its slope; U''' is
// interpolated linearly.  Only piecewise C^2, see README.
inline Potential tabulated(std::string name, std::vector<double> phi,
                           std::vector<double> u, std::vector<double> du,
                           std::vector<double> d2u, std::vector<double> d3u) {
  const std::size_t n = phi.size();
  if (n < 4 || u.size() != n || du.size() != n || d2u.size() != n ||
      d3u.size() != n) {
    throw ConfigError("tabulated potential needs >= 4 rows of 5 columns");
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (!(phi[i] > phi[i - 1])) {
      throw ConfigError("tabulated potential: phi column must increase");
    }
  }
  auto make = [&](const std::vector<double>& f, const std::vector<double>& df) {
    return std::make_shared<const detail::HermiteTable>(
        detail::HermiteTable{phi, f, df});
  };
  auto tu = make(u, du), tdu = make(du, d2u), td2u = make(d2u, d3u);
  auto x3 = std::make_shared<const std::vector<double>>(phi);
  auto y3 = std::make_shared<const std::vector<double>>(d3u);

  Potential p;
  p.name = std::move(name);
  p.u = [tu](double f) { return (*tu)(f); };
  p.du = [tdu](double f) { return (*tdu)(f); };
  p.d2u = [td2u](double f) { return (*td2u)(f); };
  p.d3u = [x3, y3](double f) {
    const auto& x = *x3;
    const auto& y = *y3;
    if (f < x.front() || f > x.back()) {
      throw DomainError("tabulated potential evaluated outside its table");
    }
    auto it = std::upper_bound(x.begin(), x.end(), f);
    std::size_t i = it == x.begin() ? 0 : std::size_t(it - x.begin()) - 1;
    if (i + 1 >= x.size()) i = x.size() - 2;
    const double s = (f - x[i]) / (x[i + 1] - x[i]);
    return (1 - s) * y[i] + s * y[i + 1];
  };
  return p;
}

// Reads whitespace separated rows "phi U U' U'' U'''"; '#' starts a comment.
inline Potential load_tabulated(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open potential table " + path);
  std::vector<double> c[5];
  std::string line;
  while (std::getline(in, line)) {
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    std::istringstream ls(line);
    double v[5];
    int k = 0;
    while (k < 5 && (ls >> v[k])) ++k;
    if (k == 0) continue;
    if (k != 5) throw ConfigError("malformed row in " + path + ": " + line);
    for (int j = 0; j < 5; ++j) c[j].push_back(v[j]);
  }
  return tabulated(path, c[0], c[1], c[2], c[3], c[4]);
}

struct InvariantCheck {
  std::string name;
  double max_violation = 0.0;
  bool pass = false;
};

struct ValidationReport {
  std::vector<InvariantCheck> checks;
  bool pass() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const InvariantCheck& c) { return c.pass; });
  }
};

// Samples [-2, 2] uniformly.  Derivatives are compared against Richardson
// extrapolated central differences (step 1e-3), so the truncation error is
// O(1e-12) for smooth potentials and `tol` is meaningful down to ~1e-10.
inline ValidationReport validate(const Potential& p, int n_samples = 256,
                                 double tol = 1e-10) {
  if (n_samples < 16) throw PreconditionError("validate needs n_samples >= 16");
  std::vector<double> xs(n_samples);
  for (int i = 0; i < n_samples; ++i) xs[i] = -2.0 + 4.0 * i / (n_samples - 1);

  auto fd = [](const std::function<double(double)>& f, double x) {
    const double h = 1e-3;
    const double d1 = (f(x + h) - f(x - h)) / (2 * h);
    const double d2 = (f(x + h / 2) - f(x - h / 2)) / h;
    return (4 * d2 - d1) / 3;
  };

  InvariantCheck even{"evenness"}, vac{"vacuum normalization"},
      pos{"positivity on (-1,1)"}, dd{"derivative consistency"};
  for (double x : xs) {
    const double ux = p.u(x);
    even.max_violation = std::max(
        even.max_violation, std::abs(ux - p.u(-x)) / (1 + std::abs(ux)));
    if (std::abs(x) < 1 - 1e-12 && !(ux > 0)) {
      pos.max_violation = std::max(pos.max_violation, std::abs(ux) + 1e-300);
    }
    const double e1 = std::abs(p.du(x) - fd(p.u, x)) / (1 + std::abs(p.du(x)));
    const double e2 =
        std::abs(p.d2u(x) - fd(p.du, x)) / (1 + std::abs(p.d2u(x)));
    const double e3 =
        std::abs(p.d3u(x) - fd(p.d2u, x)) / (1 + std::abs(p.d3u(x)));
    dd.max_violation = std::max({dd.max_violation, e1, e2, e3});
  }
  for (double s : {-1.0, 1.0}) {
    vac.max_violation = std::max({vac.max_violation, std::abs(p.u(s)),
                                  std::abs(p.d2u(s) - 1.0)});
  }
  // Vacuum normalization has its own fixed tolerance.
  vac.pass = vac.max_violation <= 1e-12;
  even.pass = even.max_violation <= tol;
  pos.pass = pos.max_violation == 0.0;
  dd.pass = dd.max_violation <= tol;

  ValidationReport r;
  r.checks = {even, vac, pos, dd};
  return r;
}

}  // namespace kinkclusters
