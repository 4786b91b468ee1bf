#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "kinkclusters/nbody.hpp"

namespace kinkclusters {
namespace {

constexpr double kM = 2.0 / 3.0;
constexpr double kKappa = 2.0;

double max_residual(const TodaState& s) {
  // Closed-form derivative of the explicit solution against toda_rhs.
  const std::size_t n = s.n();
  auto [da, dp] = toda_rhs(s);
  double r = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    const double c = double(n) + 1.0 - 2.0 * double(k);
    r = std::max(r, std::abs(da[k - 1] + c / s.time));
    r = std::max(r, std::abs(dp[k - 1] - s.mass * c / (s.time * s.time)));
  }
  return r;
}

TEST(Toda, ExplicitGapValue) {
  const TodaState s = explicit_parabolic(2, kM, kKappa, 10.0);
  EXPECT_NEAR(s.a[1] - s.a[0], 2 * std::log(20.0) - std::log(1.0 / 3.0), 1e-13);
  EXPECT_NEAR(s.a[1] - s.a[0], 7.0901, 1e-4);
  EXPECT_NEAR(s.a[0] + s.a[1], 0.0, 1e-14);
}

TEST(Toda, ExplicitResidual) {
  EXPECT_LE(max_residual(explicit_parabolic(2, kM, kKappa, 1.0)), 1e-14);
  for (std::size_t n = 2; n <= 5; ++n) {
    const TodaState s = explicit_parabolic(n, kM, kKappa, 1.0, 3.0);
    EXPECT_LE(max_residual(s), 1e-14) << n;
    EXPECT_NEAR(toda_momentum(s), 0.0, 1e-14);
    EXPECT_NEAR(toda_energy(s), 0.0, 1e-13);
    double mean = 0;
    for (double a : s.a) mean += a / double(n);
    EXPECT_NEAR(mean, 3.0, 1e-13);
  }
}

TEST(Toda, SymmetricRestMiddleForceVanishes) {
  TodaState s;
  s.a = {-5, 0, 5};
  s.p = {0, 0, 0};
  auto [da, dp] = toda_rhs(s);
  EXPECT_EQ(dp[1], 0.0);
  EXPECT_GT(dp[0], 0.0);
  EXPECT_LT(dp[2], 0.0);
}

TEST(Toda, AsymptoticLawMatchesExplicit) {
  for (std::size_t n = 2; n <= 5; ++n) {
    const TodaState s = explicit_parabolic(n, kM, kKappa, 7.5);
    auto [y, v] = asymptotic_law(n, kM, kKappa, 7.5);
    const auto g = s.gaps();
    for (std::size_t k = 0; k + 1 < n; ++k) EXPECT_NEAR(g[k], y[k], 1e-13);
    for (std::size_t k = 0; k < n; ++k) EXPECT_NEAR(s.p[k] / kM, v[k], 1e-15);
  }
  auto [y, v] = asymptotic_law(2, kM, kKappa, 1e6);
  EXPECT_NEAR(y[0] - 2 * std::log(kKappa * 1e6), -std::log(kM / 2), 1e-12);
  EXPECT_LT(std::abs(v[0]) + std::abs(v[1]), 1e-5);
  EXPECT_THROW(asymptotic_law(2, kM, kKappa, 0.0), PreconditionError);
}

TEST(Toda, AConstantIdentity) {
  // 2 log(A t) - log(2 sigma_k) is the same gap law written with A = kappa sqrt(2/M).
  for (std::size_t n = 2; n <= 6; ++n) {
    const SpectralData d = spectral_data(n, kM, kKappa);
    auto [y, v] = asymptotic_law(n, kM, kKappa, 13.0);
    for (std::size_t k = 0; k + 1 < n; ++k) {
      EXPECT_NEAR(2 * std::log(d.A * 13.0) - std::log(2 * d.sigma[Eigen::Index(k)]), y[k], 1e-13);
    }
  }
}

TEST(Toda, IntegrateMatchesClosedForm) {
  const TodaState s = explicit_parabolic(2, kM, kKappa, 1.0);
  TodaOptions opt;
  opt.output_times = {100.0};
  const auto traj = integrate(s, 100.0, opt);
  const TodaState e = explicit_parabolic(2, kM, kKappa, 100.0);
  ASSERT_DOUBLE_EQ(traj.back().time, 100.0);
  EXPECT_NEAR(traj.back().a[1], e.a[1], 1e-8);
  EXPECT_NEAR(traj.back().p[1], e.p[1], 1e-8);
}

TEST(Toda, Conservation) {
  for (std::size_t n : {2u, 3u}) {
    const TodaState s = explicit_parabolic(n, kM, kKappa, 1.0);
    const auto traj = integrate(s, 1e4);
    double de = 0, dp = 0;
    for (const auto& x : traj) {
      de = std::max(de, std::abs(toda_energy(x) - toda_energy(s)));
      dp = std::max(dp, std::abs(toda_momentum(x) - toda_momentum(s)));
    }
    EXPECT_LE(de, 1e-8);
    EXPECT_LE(dp, 1e-10);
  }
}

TEST(Toda, CollisionStops) {
  TodaState s;
  s.mass = kM;
  s.kappa = kKappa;
  s.a = {-3, 3};
  s.p = {0, 0};
  try {
    integrate(s, 100.0);
    FAIL() << "expected a collision";
  } catch (const CollisionEvent& e) {
    EXPECT_GT(e.time, 0.0);
    EXPECT_LT(e.time, 100.0);
  }
  EXPECT_THROW(integrate(s, -1.0), PreconditionError);
}

TEST(Toda, BackwardInverts) {
  const TodaState s = explicit_parabolic(3, kM, kKappa, 50.0);
  const TodaState b = integrate_backward(s, 5.0);
  const TodaState e = explicit_parabolic(3, kM, kKappa, 5.0);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(b.a[k], e.a[k], 1e-8);
    EXPECT_NEAR(b.p[k], e.p[k], 1e-8);
  }
}

TEST(Toda, EscapePerturbationsConverge) {
  for (std::size_t n : {2u, 3u}) {
    for (double sign : {1.0, -1.0}) {
      std::vector<double> delta(n);
      for (std::size_t l = 0; l < n; ++l) delta[l] = sign * 1e-2 * (l % 2 ? 1.0 : -1.0);
      const TodaState s = parabolic_perturbation(n, kM, kKappa, 10.0, delta, 1e6);
      const TodaState e = explicit_parabolic(n, kM, kKappa, 10.0);
      double dev0 = 0;
      for (std::size_t k = 0; k < n; ++k) dev0 = std::max(dev0, std::abs(s.a[k] - e.a[k]));
      EXPECT_LE(dev0, 2e-2);
      EXPECT_GT(dev0, 1e-3);

      TodaOptions opt;
      opt.output_times = {1e2, 1e3, 1e4};
      const auto traj = integrate(s, 1e4, opt);
      for (const auto& x : traj) {
        auto [y, v] = asymptotic_law(n, kM, kKappa, x.time);
        const auto g = x.gaps();
        for (std::size_t k = 0; k + 1 < n; ++k) EXPECT_LE(std::abs(g[k] - y[k]), 0.05);
      }
    }
  }
}

TEST(Toda, MomentumPerturbationStaysOnLaw) {
  // delta = 1e-3 on the momenta along the bounded l = 1 mode.
  std::vector<double> delta = {0.0, 1e-3 * 10.0};
  const TodaState s = parabolic_perturbation(2, kM, kKappa, 10.0, delta, 1e6);
  TodaOptions opt;
  for (double t = 20; t <= 1e4; t *= 2) opt.output_times.push_back(t);
  const auto traj = integrate(s, 1e4, opt);
  const double A = kKappa * std::sqrt(2 / kM);
  double lo = 1e9, hi = -1e9;
  for (const auto& x : traj) {
    const double r = x.gaps()[0] - 2 * std::log(A * x.time);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  EXPECT_LT(hi - lo, 0.05);
}

TEST(Spectral, LaplacianSigma) {
  const Eigen::MatrixXd d = dirichlet_laplacian(4);
  const Eigen::VectorXd s = sigma(4);
  EXPECT_NEAR(s[0], 1.5, 0);
  EXPECT_NEAR(s[1], 2.0, 0);
  EXPECT_LE((d * s - Eigen::VectorXd::Ones(3)).norm(), 1e-15);
  EXPECT_DOUBLE_EQ(mu0(4), 0.2);
  for (std::size_t n = 2; n <= 12; ++n) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dirichlet_laplacian(n));
    EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
  }
  EXPECT_EQ(dirichlet_laplacian(1).size(), 0);
}

TEST(Spectral, CriticalPoint) {
  const CriticalPoint c = critical_point(3);
  EXPECT_NEAR(sigma(3)[0], 1.0, 0);
  EXPECT_DOUBLE_EQ(mu0(3), 0.5);
  EXPECT_NEAR(c.lambda_cr, 1.0, 1e-15);
  EXPECT_NEAR(c.z_cr.norm(), 0.0, 1e-15);
  // z_cr satisfies the constraint 1 . Delta^{-1}... via the Lagrange condition:
  // e^{-z_cr} is proportional to sigma.
  const CriticalPoint c5 = critical_point(5);
  const Eigen::VectorXd s5 = sigma(5);
  for (Eigen::Index k = 0; k < 4; ++k) {
    EXPECT_NEAR(std::exp(-c5.z_cr[k]) / s5[k], c5.lambda_cr, 1e-14);
  }
  // The multiplier makes sigma . z_cr vanish.
  EXPECT_NEAR(s5.dot(c5.z_cr), 0.0, 1e-13);
}

TEST(Spectral, InteractionMatrixN3) {
  Eigen::MatrixXd expect(3, 3);
  expect << 2, -2, 0, -2, 4, -2, 0, -2, 2;
  EXPECT_EQ(interaction_matrix(3), expect);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(expect);
  EXPECT_NEAR(es.eigenvalues()[0], 0.0, 1e-14);
  EXPECT_NEAR(es.eigenvalues()[1], 2.0, 1e-14);
  EXPECT_NEAR(es.eigenvalues()[2], 6.0, 1e-14);
}

TEST(Spectral, LegendreEigenvectors) {
  for (std::size_t n = 1; n <= 12; ++n) {
    const Eigen::MatrixXd u = interaction_matrix(n);
    EXPECT_LE((u * Eigen::VectorXd::Ones(Eigen::Index(n))).norm(), 1e-15);
    const auto P = legendre_vectors(n);
    ASSERT_EQ(P.size(), n);
    for (std::size_t l = 0; l < n; ++l) {
      const double lam = double(l * (l + 1));
      EXPECT_LE((u * P[l] - lam * P[l]).norm() / P[l].norm(), 1e-9) << n << " " << l;
      for (std::size_t m = 0; m < n; ++m) {
        EXPECT_NEAR(P[l].dot(P[m]), l == m ? 1.0 : 0.0, 1e-12);
      }
      EXPECT_GT(P[l][Eigen::Index(n) - 1], 0.0);
    }
  }
}

TEST(Euler, Homogeneous) {
  const double t0 = 4.0;
  Eigen::VectorXd b0(4);
  b0 << 0.3, -1.0, 2.0, 0.5;
  const EulerSolution sol = euler_solve(4, t0, b0, nullptr, nullptr);
  for (double t : {0.0, 1.0, 17.0, 300.0}) {
    for (std::size_t l = 0; l < 4; ++l) {
      const double bl0 = sol.legendre[l].dot(b0);
      const double expect = std::pow(t0, double(l)) * bl0 * std::pow(t0 + t, -double(l));
      auto [b, w] = sol.modes[l](t);
      EXPECT_NEAR(b, expect, 1e-12);
      EXPECT_NEAR(w, -double(l) * expect / (t0 + t), 1e-12);
    }
  }
  auto [B, W] = sol(0.0);
  EXPECT_LE((B - b0).norm(), 1e-12);
}

double mode_residual(const EulerMode& m, double t) {
  const double h = 1e-3;
  auto d = [&](int j) { return m(t + j * h); };
  auto p2 = d(2), p1 = d(1), m1 = d(-1), m2 = d(-2);
  auto c = m(t);
  const double db = (-p2.first + 8 * p1.first - 8 * m1.first + m2.first) / (12 * h);
  const double dw = (-p2.second + 8 * p1.second - 8 * m1.second + m2.second) / (12 * h);
  const double L = m.l;
  return std::max(std::abs(db - c.second - m.f(t)),
                  std::abs(dw - L * (L + 1) * std::pow(m.t0 + t, -2) * c.first - m.g(t)));
}

TEST(Euler, ForcedScalarMode) {
  const double t0 = 10.0;
  Eigen::VectorXd b0(1);
  b0 << 0.7;
  auto G = [&](double t) {
    Eigen::VectorXd g(1);
    g << std::pow(t0 + t, -3);
    return g;
  };
  const EulerSolution sol = euler_solve(1, t0, b0, nullptr, G);
  for (double t : {0.01, 3.0, 40.0, 99.0}) EXPECT_LE(mode_residual(sol.modes[0], t), 1e-10);
  EXPECT_NEAR(sol.modes[0](0.0).first, 0.7, 1e-12);
}

TEST(Euler, ForcedModesAndBound) {
  const double t0 = 10.0;
  auto G = [&](double t) {
    Eigen::VectorXd g(3);
    g << std::pow(t0 + t, -3), 0.5 * std::pow(t0 + t, -3), -std::pow(t0 + t, -2.5);
    return g;
  };
  auto F = [&](double t) {
    Eigen::VectorXd f(3);
    f << std::exp(-t), 0.0, std::pow(t0 + t, -2);
    return f;
  };
  Eigen::VectorXd b0(3);
  b0 << 0.1, -0.2, 0.3;
  const EulerSolution sol = euler_solve(3, t0, b0, F, G);
  double sup = 0;
  for (std::size_t l = 0; l < 3; ++l) {
    for (double t : {0.5, 5.0, 20.0, 50.0, 99.0}) {
      EXPECT_LE(mode_residual(sol.modes[l], t), 1e-8) << l << " " << t;
    }
  }
  for (double t : {0.0, 10.0, 1e3, 1e5}) sup = std::max(sup, sol(t).first.norm());
  EXPECT_LT(sup, 10 * (b0.norm() + 1.0));
}

TEST(Euler, RejectsSlowForcing) {
  Eigen::VectorXd b0 = Eigen::VectorXd::Zero(2);
  auto G = [](double t) { return Eigen::VectorXd::Constant(2, 1.0 / (1.0 + t)); };
  auto F = [](double t) { return Eigen::VectorXd::Constant(2, 1.0 / (1.0 + t)); };
  EXPECT_THROW(euler_solve(2, 1.0, b0, nullptr, G), InadmissibleForcing);
  EXPECT_THROW(euler_solve(2, 1.0, b0, F, nullptr), InadmissibleForcing);
}

}  // namespace
}  // namespace kinkclusters
