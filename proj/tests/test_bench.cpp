#include "sgmpc/bench.hpp"
#include "sgmpc/error.hpp"
#include "sgmpc/pipeline.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

namespace sgmpc {
namespace {

using testing::max_abs;

double spectral_radius(const Eigen::MatrixXd& m) { return m.eigenvalues().cwiseAbs().maxCoeff(); }

QuadrotorParams quad_params() {
  QuadrotorParams qp;
  auto [a, b] = quadrotor_linearization(QuadrotorPhysical{});
  qp.A_c = a;
  qp.B_c = b;
  return qp;
}

TEST(Expm, ZeroIsIdentity) {
  EXPECT_LT(max_abs(expm(Eigen::MatrixXd::Zero(3, 3)) - Eigen::MatrixXd::Identity(3, 3)), 1e-15);
}

TEST(Expm, ScalarClosedForm) {
  for (double a : {-30.0, -2.5, 0.1, 1.0, 7.0, 40.0}) {
    const double e = expm(Eigen::MatrixXd::Constant(1, 1, a))(0, 0);
    EXPECT_NEAR(e / std::exp(a), 1.0, 1e-12) << "a = " << a;
  }
}

TEST(Expm, RotationGenerator) {
  const double th = 2.3;
  Eigen::Matrix2d m;
  m << 0.0, -th, th, 0.0;
  Eigen::Matrix2d r;
  r << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  EXPECT_LT(max_abs(expm(m) - r), 1e-12);
}

TEST(Expm, NonFiniteInputThrows) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
  m(0, 1) = std::numeric_limits<double>::quiet_NaN();
  try {
    expm(m);
    FAIL() << "expected NonConvergentSeries";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonConvergentSeries);
  }
}

TEST(Discretize, IntegratorZeroOrderHold) {
  const Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 2);
  const Eigen::MatrixXd B = (Eigen::MatrixXd(2, 1) << 1.5, -2.0).finished();
  const auto [ad, bd] = discretize(A, B, 0.05, DiscretizationMethod::kZeroOrderHold);
  EXPECT_LT(max_abs(ad - Eigen::MatrixXd::Identity(2, 2)), 1e-15);
  EXPECT_LT(max_abs(bd - 0.05 * B), 1e-15);
}

TEST(Discretize, ScalarZeroOrderHold) {
  const double a = -3.0, b = 2.0, dt = 0.1;
  const auto [ad, bd] = discretize(Eigen::MatrixXd::Constant(1, 1, a), Eigen::MatrixXd::Constant(1, 1, b), dt,
                                   DiscretizationMethod::kZeroOrderHold);
  EXPECT_NEAR(ad(0, 0), std::exp(a * dt), 1e-12);
  EXPECT_NEAR(bd(0, 0), (std::exp(a * dt) - 1.0) / a * b, 1e-12);
}

TEST(Discretize, EulerAndBadStep) {
  const Eigen::MatrixXd A = Eigen::MatrixXd::Constant(1, 1, -2.0);
  const Eigen::MatrixXd B = Eigen::MatrixXd::Constant(1, 1, 1.0);
  const auto [ad, bd] = discretize(A, B, 0.1, DiscretizationMethod::kEuler);
  EXPECT_DOUBLE_EQ(ad(0, 0), 0.8);
  EXPECT_DOUBLE_EQ(bd(0, 0), 0.1);
  EXPECT_THROW(discretize(A, B, 0.0, DiscretizationMethod::kEuler), Error);
}

TEST(Discretize, EulerVersusZohOnNominalVehicle) {
  const Scenario sc = scenario_vehicle();
  const Eigen::VectorXd xi0 = Eigen::VectorXd::Zero(2);
  const Eigen::MatrixXd a = sc.system.A.evaluate(xi0);
  const Eigen::MatrixXd b = sc.system.B.evaluate(xi0);
  const auto [az, bz] = discretize(a, b, 0.05, DiscretizationMethod::kZeroOrderHold);
  const auto [ae, be] = discretize(a, b, 0.05, DiscretizationMethod::kEuler);
  EXPECT_LE(std::abs(spectral_radius(az) - spectral_radius(ae)), 2e-2);
}

TEST(Discretize, PolynomialEulerEvaluatesPointwise) {
  const Scenario sc = scenario_vehicle();
  const StochasticLTI e = discretize_euler(sc.system, 0.05);
  const Eigen::Vector2d xi(0.7, -1.2);
  const Eigen::MatrixXd expected = Eigen::MatrixXd::Identity(4, 4) + 0.05 * sc.system.A.evaluate(xi);
  EXPECT_LT(max_abs(e.A.evaluate(xi) - expected), 1e-12);
  EXPECT_LT(max_abs(e.B.evaluate(xi) - 0.05 * sc.system.B.evaluate(xi)), 1e-15);
}

TEST(ObstacleScenario, DefaultParameters) {
  const Scenario sc = scenario_obstacle();
  EXPECT_EQ(sc.problem.T, 4);
  EXPECT_EQ(sc.x0, Eigen::Vector2d(20.0, 10.0));
  EXPECT_EQ(sc.problem.Q, Eigen::MatrixXd(Eigen::Vector2d(100.0, 100.0).asDiagonal()));
  EXPECT_DOUBLE_EQ(sc.problem.R(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(sc.problem.u_lower(0), -0.5);
  EXPECT_DOUBLE_EQ(sc.problem.u_upper(0), 0.5);
  ASSERT_EQ(sc.problem.constraints.size(), 1u);
  EXPECT_DOUBLE_EQ(sc.problem.constraints[0].beta, 0.99);
  // dA/dxi_1 = rho1, dB/dxi_2 = rho2.
  const Eigen::Vector2d e1(1.0, 0.0), e2(0.0, 1.0), zero(0.0, 0.0);
  EXPECT_NEAR(sc.system.A.evaluate(e1)(0, 0) - sc.system.A.evaluate(zero)(0, 0), 0.001, 1e-15);
  EXPECT_NEAR(sc.system.B.evaluate(e2)(1, 0) - sc.system.B.evaluate(zero)(1, 0), 0.05, 1e-15);
  EXPECT_NEAR(sc.system.A.evaluate(zero)(1, 1), 0.85, 1e-15);
}

TEST(ObstacleScenario, DeterministicFlagRemovesUncertainty) {
  ObstacleParams op;
  op.deterministic = true;
  const Scenario sc = scenario_obstacle(op);
  EXPECT_EQ(sc.system.degree(), 0);
}

TEST(VehicleScenario, DefaultParameters) {
  const Scenario sc = scenario_vehicle();
  EXPECT_EQ(sc.x0, Eigen::Vector4d(1.0, 0.0, 0.0, 0.0));
  EXPECT_DOUBLE_EQ(sc.problem.Q(2, 2), 20000.0);
  EXPECT_DOUBLE_EQ(sc.problem.Q(0, 0), 7000.0);
  ASSERT_TRUE(sc.problem.tracking.has_value());
  EXPECT_DOUBLE_EQ(sc.problem.tracking->S(0, 0), 100.0);
  EXPECT_EQ(sc.problem.constraints.size(), 8u);
  EXPECT_NEAR(-sc.problem.constraints[4].b, 0.5, 1e-4);  // e2 max, rad
  const double c0 = 967.0 * 180.0 / std::numbers::pi;
  const Eigen::MatrixXd b = sc.system.B.evaluate(Eigen::Vector2d::Zero());
  EXPECT_NEAR(b(1, 0), 2.0 * c0 / 1270.0, 1e-9);
  EXPECT_NEAR(b(3, 0), 2.0 * 1.015 * c0 / 1536.7, 1e-9);
  const Eigen::MatrixXd a = sc.system.A.evaluate(Eigen::Vector2d::Zero());
  EXPECT_NEAR(a(1, 1), -4.0 * c0 / (1270.0 * 20.0), 1e-9);
  // Uncertain stiffness scales B linearly.
  const Eigen::MatrixXd b1 = sc.system.B.evaluate(Eigen::Vector2d(1.0, 0.0));
  EXPECT_NEAR(b1(1, 0) / b(1, 0), 1.08, 1e-12);
}

TEST(VehicleScenario, MixtureIsStandardized) {
  const Scenario sc = scenario_vehicle();
  EXPECT_LT(sc.mixture.mean().norm(), 1e-15);
  EXPECT_NEAR(sc.mixture.covariance()(0, 0), 1.0, 1e-12);
  EXPECT_GT(sc.mixture.covariance()(0, 1), 0.0);
}

TEST(VehicleScenario, ModelAtUsesZeroOrderHold) {
  const Scenario sc = scenario_vehicle();
  const Eigen::Vector2d xi(0.3, -0.4);
  const DiscreteModel dm = sc.model_at(xi);
  const auto [ad, bd] =
      discretize(sc.system.A.evaluate(xi), sc.system.B.evaluate(xi), 0.05, DiscretizationMethod::kZeroOrderHold);
  EXPECT_LT(max_abs(dm.A - ad), 1e-12);
  EXPECT_LT(max_abs(dm.B - bd), 1e-12);
  EXPECT_EQ(dm.D.cols(), 1);
}

TEST(VehicleScenario, RecedingRunRegulatesLateralError) {
  const Scenario sc = scenario_vehicle();
  const PipelineResult res = run_pipeline(sc, PipelineConfig{});
  ASSERT_EQ(res.states.size(), 81u);
  EXPECT_LE(std::abs(res.states.back().block(0)(0)), 0.05);
  for (const auto& s : res.solutions) {
    for (double m : s.margins) EXPECT_LE(m, 1e-6);
  }
}

TEST(QuadrotorScenario, MissingModelThrows) {
  try {
    scenario_quadrotor(QuadrotorParams{});
    FAIL() << "expected MissingModelConfig";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingModelConfig);
  }
}

TEST(QuadrotorScenario, DefaultValues) {
  const QuadrotorParams qp = quad_params();
  EXPECT_DOUBLE_EQ(qp.u_eq, 192.8);
  EXPECT_NEAR(qp.attitude_max, 5.0 * std::numbers::pi / 180.0, 1e-10);
  const Eigen::Vector3d h0 = helix_reference(0.0);
  EXPECT_LT((h0 - Eigen::Vector3d(2.0, 0.0, 0.0)).norm(), 1e-15);
  const Scenario sc = scenario_quadrotor(qp);
  EXPECT_EQ(sc.n_x(), 12);
  EXPECT_EQ(sc.n_u(), 4);
  EXPECT_EQ(sc.problem.constraints.size(), 4u);
  EXPECT_EQ(sc.reference(0), Eigen::VectorXd(Eigen::Vector3d(2.0, 0.0, 0.0)));
  QuadrotorParams step = qp;
  step.reference = "step";
  EXPECT_EQ(scenario_quadrotor(step).reference(5), Eigen::VectorXd(Eigen::Vector3d(10.0, 10.0, 0.0)));
  step.reference = "spiral";
  EXPECT_THROW(scenario_quadrotor(step), Error);
}

TEST(Quadrotor, HoverIsEquilibrium) {
  const QuadrotorPhysical q;
  const Eigen::VectorXd f = quadrotor_rhs(q, Eigen::VectorXd::Zero(12), Eigen::Vector4d::Constant(q.hover_speed));
  EXPECT_LT(f.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Quadrotor, LinearizationMatchesFiniteDifferences) {
  const QuadrotorPhysical q;
  const auto [a, b] = quadrotor_linearization(q);
  const Eigen::Vector4d u0 = Eigen::Vector4d::Constant(q.hover_speed);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(12);
  const double h = 1e-5;
  for (int j = 0; j < 12; ++j) {
    Eigen::VectorXd xp = x0, xm = x0;
    xp(j) += h;
    xm(j) -= h;
    const Eigen::VectorXd col = (quadrotor_rhs(q, xp, u0) - quadrotor_rhs(q, xm, u0)) / (2 * h);
    EXPECT_LT((col - a.col(j)).cwiseAbs().maxCoeff(), 1e-6) << "state column " << j;
  }
  for (int j = 0; j < 4; ++j) {
    Eigen::Vector4d up = u0, um = u0;
    up(j) += h;
    um(j) -= h;
    const Eigen::VectorXd col = (quadrotor_rhs(q, x0, up) - quadrotor_rhs(q, x0, um)) / (2 * h);
    EXPECT_LT((col - b.col(j)).cwiseAbs().maxCoeff(), 1e-6) << "input column " << j;
  }
}

TEST(McPropagate, ZeroUncertaintyMatchesDeterministicSimulation) {
  ObstacleParams op;
  op.deterministic = true;
  const Scenario sc = scenario_obstacle(op);
  const Eigen::MatrixXd u = (Eigen::MatrixXd(4, 1) << 0.1, -0.3, 0.5, 0.0).finished();
  const McReport r = mc_propagate(sc, u, 50, McOptions{});
  const DiscreteModel dm = sc.model_at(Eigen::Vector2d::Zero());
  Eigen::VectorXd x = sc.x0;
  for (int t = 0; t <= 4; ++t) {
    EXPECT_LT((r.mean.row(t).transpose() - x).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(r.std.row(t).cwiseAbs().maxCoeff(), 1e-12);
    if (t < 4) x = dm.A * x + dm.B * u.row(t).transpose();
  }
}

TEST(McPropagate, DoublingSamplesIsConsistent) {
  const Scenario sc = scenario_obstacle();
  const Eigen::MatrixXd u = Eigen::MatrixXd::Constant(4, 1, -0.2);
  const McReport a = mc_propagate(sc, u, 20000, McOptions{1, -1});
  const McReport b = mc_propagate(sc, u, 40000, McOptions{1, -1});
  for (int t = 1; t <= 4; ++t) {
    for (int i = 0; i < 2; ++i) {
      const double se = b.std(t, i) / std::sqrt(20000.0);
      EXPECT_LE(std::abs(a.mean(t, i) - b.mean(t, i)), 6.0 * se);
    }
  }
  for (double v : a.violation_rate) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(McPropagate, SnapshotAndMinimumSamples) {
  const Scenario sc = scenario_obstacle();
  const Eigen::MatrixXd u = Eigen::MatrixXd::Zero(4, 1);
  const McReport r = mc_propagate(sc, u, 100, McOptions{3, 2});
  ASSERT_TRUE(r.snapshot.has_value());
  EXPECT_EQ(r.snapshot->rows(), 100);
  EXPECT_NEAR(r.snapshot->col(0).mean(), r.mean(2, 0), 1e-9);
  EXPECT_THROW(mc_propagate(sc, u, 1, McOptions{}), Error);
}

TEST(McPropagate, SurrogateAndTrueSystemAgreeInMean) {
  const Scenario sc = scenario_obstacle();
  const PipelineResult res = run_pipeline(sc, PipelineConfig{});
  const int n = 20000;
  const McReport truth = mc_propagate(sc, res.inputs, n, McOptions{8, -1});
  std::vector<Eigen::MatrixXd> states;
  const SampleBatch batch = sample(sc.mixture, n, 9);
  for (const auto& x : res.states) states.push_back(sample_surrogate(x, res.basis, batch.points));
  const McReport sur = mc_statistics(states, sc.problem.constraints, sc.problem.T);
  for (int t = 1; t <= sc.problem.T; ++t) {
    for (int i = 0; i < 2; ++i) {
      const double se = std::hypot(truth.std(t, i), sur.std(t, i)) / std::sqrt(static_cast<double>(n));
      EXPECT_LE(std::abs(truth.mean(t, i) - sur.mean(t, i)), 5.0 * se);
    }
  }
}

TEST(McStatistics, CountsViolationsOnActiveSteps) {
  AffineConstraint c;
  c.a = Eigen::VectorXd::Ones(1);
  c.b = -1.0;  // x <= 1
  c.active_times = {2};
  std::vector<Eigen::MatrixXd> states(3, Eigen::MatrixXd(4, 1));
  states[0] << 5, 5, 5, 5;                // t = 0 never counts
  states[1] << 2, 2, 2, 2;                // inactive step
  states[2] << 0.5, 1.5, 0.2, 3.0;        // half violate
  const McReport r = mc_statistics(states, {c}, 2);
  ASSERT_EQ(r.violation_rate.size(), 1u);
  EXPECT_DOUBLE_EQ(r.violation_rate[0], 0.5);
  EXPECT_DOUBLE_EQ(r.mean(2, 0), 1.3);
}

TEST(McMpc, ZeroUncertaintyMatchesGalerkinSolve) {
  ObstacleParams op;
  op.deterministic = true;
  const Scenario sc = scenario_obstacle(op);
  const PipelineResult res = run_pipeline(sc, PipelineConfig{});
  const McMpcResult mc = mc_mpc(sc, 50, 0, SolverConfig{});
  ASSERT_EQ(mc.solution.status, SolveStatus::kOptimal);
  EXPECT_LE(max_abs(mc.solution.u_star - res.inputs), 1e-4);
}

TEST(McMpc, TrajectoryCostCloseToGalerkin) {
  const Scenario sc = scenario_obstacle();
  const PipelineResult res = run_pipeline(sc, PipelineConfig{});
  const McMpcResult mc = mc_mpc(sc, 5000, 1, SolverConfig{});
  ASSERT_EQ(mc.solution.status, SolveStatus::kOptimal);
  std::vector<CoeffVector> uh;
  for (int t = 0; t < sc.problem.T; ++t) {
    uh.push_back(CoeffVector::deterministic(mc.solution.u_star.row(t).transpose(), res.basis.size()));
  }
  const auto xs = propagate(res.gs, res.problem.x_init, uh, {}, sc.problem.T);
  const double cost_mc = trajectory_cost(res.problem, res.gs, xs, mc.solution.u_star);
  const double cost_gal = trajectory_cost(res.problem, res.gs, res.states, res.inputs);
  EXPECT_LE(std::abs(cost_mc - cost_gal), 0.05 * std::abs(cost_gal));
  EXPECT_GT(mc.report.wall_time_s, 0.0);
  EXPECT_THROW(mc_mpc(sc, 1, 0, SolverConfig{}), Error);
}

TEST(ComparePdf, IdenticalAndDisjoint) {
  const std::vector<double> a{0.3, -1.0, 2.0, 0.7};
  EXPECT_DOUBLE_EQ(compare_pdf(a, a), 0.0);
  EXPECT_DOUBLE_EQ(compare_pdf({1.0, 2.0, 3.0}, {10.0, 11.0}), 1.0);
  EXPECT_DOUBLE_EQ(compare_pdf({10.0, 11.0}, {1.0, 2.0, 3.0}), 1.0);
}

TEST(ComparePdf, HandComputedStatistic) {
  // F_a jumps at 1, 2, 3; F_b at 2.5. Largest gap 2/3 just below 2.5.
  EXPECT_NEAR(compare_pdf({1.0, 2.0, 3.0}, {2.5}), 2.0 / 3.0, 1e-15);
  // Shared atoms do not open a gap.
  EXPECT_DOUBLE_EQ(compare_pdf({1.0, 1.0, 2.0}, {1.0, 2.0, 2.0}), 1.0 / 3.0);
}

TEST(ComparePdf, TieTolerance) {
  const std::vector<double> a{1.0, 2.0};
  const std::vector<double> b{1.0 + 1e-13, 2.0 + 1e-13};
  EXPECT_DOUBLE_EQ(compare_pdf(a, b), 0.5);
  EXPECT_DOUBLE_EQ(compare_pdf(a, b, 1e-12), 0.0);
  EXPECT_THROW(compare_pdf({}, b), Error);
}

}  // namespace
}  // namespace sgmpc
