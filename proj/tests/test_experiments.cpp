#include <cmath>
#include <cstring>

#include <gtest/gtest.h>

#include "kinkclusters/experiments.hpp"

namespace kinkclusters {
namespace {

class ExperimentsTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { phi4_ = new KinkProfile(build_profile(builtin("phi4"))); }
  static void TearDownTestSuite() { delete phi4_; }
  static KinkProfile* phi4_;
};

KinkProfile* ExperimentsTest::phi4_ = nullptr;

TEST_F(ExperimentsTest, QuasiStaticAccelerationsMatchToda) {
  const MultikinkConfig cfg({-6, 6}, {-0.0086, 0.0086});
  const Grid g = Grid::with_spacing(-30, 30, 0.05);
  const QuasiStatic q = quasi_static_correction(*phi4_, cfg, g);
  const double toda = 2 * phi4_->kappa * phi4_->kappa * std::exp(-12.0) / phi4_->mass;
  EXPECT_NEAR(q.accel[0], toda, 1e-3 * toda);
  EXPECT_NEAR(q.accel[1], -toda, 1e-3 * toda);
  EXPECT_EQ(q.g.front(), 0.0);
  EXPECT_EQ(q.g.back(), 0.0);
  // Orthogonal to the translation modes.
  for (std::size_t k = 0; k < 2; ++k) {
    double dot = 0;
    for (std::size_t i = 0; i < g.nodes(); ++i) {
      const double z = lorentz_gamma(cfg.v[k]) * (g.x(i) - cfg.a[k]);
      dot += q.g[i] * phi4_->dH(z) * g.dx();
    }
    EXPECT_NEAR(dot, 0.0, 1e-12);
  }
}

TEST_F(ExperimentsTest, QuasiStaticSingleKinkIsTiny) {
  const MultikinkConfig cfg({0.0}, {});
  const Grid g = Grid::with_spacing(-20, 20, 0.05);
  const QuasiStatic q = quasi_static_correction(*phi4_, cfg, g);
  double gmax = 0;
  for (double x : q.g) gmax = std::max(gmax, std::abs(x));
  EXPECT_LT(gmax, 1e-5);
  EXPECT_NEAR(q.accel[0], 0.0, 1e-8);
}

TEST_F(ExperimentsTest, ChooseBoost) {
  const BoostResult b = choose_boost(*phi4_, centered_positions({12.0}));
  const auto& v = b.config.v;
  EXPECT_EQ(v[0] + v[1], 0.0);
  EXPECT_GT(v[1], 0.0);
  EXPECT_LE(std::abs(b.energy_error), 1e-8);
  const double law = phi4_->kappa * std::exp(-6.0) / std::sqrt(phi4_->mass / 2);
  EXPECT_NEAR(v[1], law, 0.2 * law);

  const BoostResult b3 = choose_boost(*phi4_, centered_positions({12.0, 13.0}));
  EXPECT_NEAR(b3.config.v[0] + b3.config.v[1] + b3.config.v[2], 0.0, 1e-16);
  EXPECT_NEAR(b3.config.v[2] - b3.config.v[1], b3.config.v[1] - b3.config.v[0], 1e-16);
  EXPECT_THROW(choose_boost(*phi4_, centered_positions({3.0})), PreconditionError);
}

TEST_F(ExperimentsTest, ShootingProblemThreshold) {
  const ShootingProblem p({12.0, 13.0}, 40.0);
  EXPECT_DOUBLE_EQ(p.L1, 10.0);
  EXPECT_EQ(p.n(), 3u);
  EXPECT_DOUBLE_EQ(p.threshold(), 6.0 * std::exp(-10.0));
  EXPECT_THROW(ShootingProblem({1.0}, 10.0), PreconditionError);
  EXPECT_THROW(ShootingProblem({12.0}, 0.0), PreconditionError);
}

TEST_F(ExperimentsTest, ExitMapFarApartNeverCrosses) {
  const ShootingProblem p({20.0}, 5.0);
  const ExitRecord r = exit_time_map(*phi4_, p, {22.0});
  EXPECT_FALSE(r.crossed);
  EXPECT_EQ(r.T1, 0.0);
  EXPECT_DOUBLE_EQ(r.psi[0], r.config_0.gaps()[0]);
  EXPECT_DOUBLE_EQ(r.series.t.back(), 0.0);
}

TEST_F(ExperimentsTest, ExitMapMonotoneAndLawConsistent) {
  const ShootingProblem p({12.0}, 40.0);
  const ExitRecord lo = exit_time_map(*phi4_, p, {12.4});
  const ExitRecord hi = exit_time_map(*phi4_, p, {12.8});
  EXPECT_LT(lo.psi[0], hi.psi[0]);

  // y_T on the explicit law at t_T: the backward run follows the law.
  const double tT = 200.0;
  const auto [yT, vT] = asymptotic_law(2, phi4_->mass, phi4_->kappa, tT);
  const ExitRecord r = exit_time_map(*phi4_, p, yT);
  const auto [yb, vb] = asymptotic_law(2, phi4_->mass, phi4_->kappa, tT - p.T);
  EXPECT_NEAR(r.psi[0], yb[0], 0.2);
}

TEST_F(ExperimentsTest, ExitMapIsReproducible) {
  const ShootingProblem p({12.0}, 10.0);
  const ExitRecord a = exit_time_map(*phi4_, p, {12.3});
  const ExitRecord b = exit_time_map(*phi4_, p, {12.3});
  ASSERT_EQ(a.series.size(), b.series.size());
  // Bitwise, so the NaN placeholders compare equal too.
  for (std::size_t i = 0; i < a.series.size(); ++i) {
    const auto ra = a.series.row(i), rb = b.series.row(i);
    ASSERT_EQ(ra.size(), rb.size());
    EXPECT_EQ(std::memcmp(ra.data(), rb.data(), ra.size() * sizeof(double)), 0) << i;
  }
  EXPECT_EQ(a.state_0.phi, b.state_0.phi);
}

TEST_F(ExperimentsTest, ClusterWeakInteraction) {
  const ClusterResult r = construct_cluster(*phi4_, ShootingProblem({20.0}, 5.0));
  EXPECT_LE(r.evaluations, 3);
  EXPECT_NEAR(r.fitted_gaps_0()[0], 20.0, 0.05);
}

TEST_F(ExperimentsTest, ClusterReversible) {
  const ShootingProblem p({12.0}, 40.0);
  const ClusterResult r = construct_cluster(*phi4_, p);
  EXPECT_NEAR(r.fitted_gaps_0()[0], 12.0, 0.05);
  const RunOptions o;
  const RunRecord f = evolve(phi4_->potential, r.record.state_0, p.T, o.dt(), p.T);
  double d = 0;
  for (std::size_t i = 0; i < f.final_state.phi.size(); ++i) {
    d = std::max(d, std::abs(f.final_state.phi[i] - r.record.state_T.phi[i]));
  }
  EXPECT_LE(d, 1e-5);
}

TEST_F(ExperimentsTest, ClusterSymmetricThree) {
  const ClusterResult r = construct_cluster(*phi4_, ShootingProblem({12.0, 12.0}, 20.0));
  EXPECT_NEAR(r.y_T[0], r.y_T[1], 1e-3);
  EXPECT_NEAR(r.record.psi[0], r.record.psi[1], 1e-3);
  EXPECT_NEAR(r.record.psi[0], 12.0, 0.05);
}

TEST_F(ExperimentsTest, ClusterPreconditionsAndBudget) {
  EXPECT_THROW(construct_cluster(*phi4_, ShootingProblem({12.0, 12.0, 12.0}, 10.0)),
               PreconditionError);
  EXPECT_THROW(construct_cluster(*phi4_, ShootingProblem({9.0}, 10.0)), PreconditionError);
  ShootingOptions o;
  o.budget = 1;
  o.tol_map = 1e-9;
  EXPECT_THROW(construct_cluster(*phi4_, ShootingProblem({12.0}, 10.0), o), SearchBudgetError);
}

TEST_F(ExperimentsTest, LaunchSingleKinkStays) {
  LaunchOptions o;
  o.t_run = 20.0;
  const LaunchResult r = launch_parabolic(*phi4_, 1, 10.0, o);
  for (const auto& a : r.series.a) EXPECT_NEAR(a[0], 0.0, 1e-6);
}

TEST_F(ExperimentsTest, LaunchSeparatesAndReverseApproaches) {
  const double tl = parabolic_time_for_gap(2, phi4_->mass, phi4_->kappa, 12.0);
  LaunchOptions o;
  o.t_run = 20.0;
  o.run.sample_interval = 1.0;
  const LaunchResult r = launch_parabolic(*phi4_, 2, tl, o);
  EXPECT_NEAR(r.series.t.front(), tl, 1e-12);
  EXPECT_NEAR(r.series.a[0][1] - r.series.a[0][0], 12.0, 1e-6);
  for (const auto& v : r.series.v) EXPECT_GT(v[1], 0.0);
  const double y_end = r.series.a.back()[1] - r.series.a.back()[0];
  EXPECT_GT(y_end, 12.0);
  // Gap follows the explicit law closely over this short window.
  const auto [y, v] = asymptotic_law(2, phi4_->mass, phi4_->kappa, tl + 20.0);
  EXPECT_NEAR(y_end, y[0], 1e-3);

  o.reverse = true;
  const LaunchResult b = launch_parabolic(*phi4_, 2, tl, o);
  EXPECT_LT(b.series.a.back()[1] - b.series.a.back()[0], 12.0);
  for (const auto& v : b.series.v) EXPECT_LT(v[1], 0.0);
  EXPECT_THROW(launch_parabolic(*phi4_, 2, 1.0, o), PreconditionError);
}

TEST_F(ExperimentsTest, VerifyExplicitToda) {
  const TodaState s = explicit_parabolic(3, phi4_->mass, phi4_->kappa, 50.0);
  TodaOptions opt;
  for (double t = 60; t <= 400; t += 10) opt.output_times.push_back(t);
  const auto traj = integrate(s, 400.0, opt);
  const VerificationReport r =
      verify_asymptotics(series_from_toda(traj), phi4_->mass, phi4_->kappa);
  EXPECT_NEAR(r.t_star, 0.0, 1e-6);
  EXPECT_LE(r.gap_deviation, 1e-6);
  EXPECT_LE(r.velocity_deviation, 1e-6);
  EXPECT_FALSE(r.non_monotone);
  EXPECT_TRUE(r.pass());
}

TEST_F(ExperimentsTest, VerifyShiftedOriginFitsOffset) {
  // Same law with time measured from a different origin.
  const TodaState s = explicit_parabolic(2, phi4_->mass, phi4_->kappa, 30.0);
  TodaOptions opt;
  for (double t = 40; t <= 300; t += 5) opt.output_times.push_back(t);
  auto traj = integrate(s, 300.0, opt);
  traj.erase(traj.begin());
  for (auto& x : traj) x.time -= 20.0;
  const VerificationReport r =
      verify_asymptotics(series_from_toda(traj), phi4_->mass, phi4_->kappa);
  EXPECT_NEAR(r.t_star, 20.0, 1e-3);
  EXPECT_LE(r.gap_deviation, 1e-6);
}

TEST_F(ExperimentsTest, VerifyFlagsCollidingRun) {
  TodaState s = explicit_parabolic(2, phi4_->mass, phi4_->kappa, 400.0);
  for (double& p : s.p) p = -p;
  s.time = 20.0;
  TodaOptions opt;
  for (double t = 25; t <= 100; t += 5) opt.output_times.push_back(t);
  const auto traj = integrate(s, 100.0, opt);
  const VerificationReport r =
      verify_asymptotics(series_from_toda(traj), phi4_->mass, phi4_->kappa);
  EXPECT_TRUE(r.non_monotone);
  EXPECT_FALSE(r.pass());

  auto short_traj = traj;
  short_traj.resize(4);
  EXPECT_THROW(verify_asymptotics(series_from_toda(short_traj), phi4_->mass, phi4_->kappa),
               PreconditionError);
}

}  // namespace
}  // namespace kinkclusters
