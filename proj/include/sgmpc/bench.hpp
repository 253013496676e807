#pragma once

#include "sgmpc/galerkin.hpp"
#include "sgmpc/smpc.hpp"
#include "sgmpc/uncertainty.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sgmpc {

enum class DiscretizationMethod { kZeroOrderHold, kEuler };

struct Discretization {
  DiscretizationMethod method = DiscretizationMethod::kZeroOrderHold;
  double dt = 0.05;
};

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
/// Throws NonConvergentSeries if the series does not reach `tol` in the term budget.
Eigen::MatrixXd expm(const Eigen::MatrixXd& m, double tol = 1e-12);

/// Discrete (A, B) from continuous (A, B) over one step of length dt.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> discretize(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double dt,
                                                       DiscretizationMethod method);

/// Forward Euler applied entrywise to a polynomial system: I + dt A(xi), dt B(xi), dt D(xi).
StochasticLTI discretize_euler(const StochasticLTI& sys, double dt);

enum class RunMode { kOpenLoop, kReceding };

struct Scenario {
  std::string name;
  GaussianMixture mixture = GaussianMixture::standard_normal(1);
  StochasticLTI system;  // continuous-time iff discretization is set
  std::optional<Discretization> discretization;
  MpcProblem problem;  // x_init is filled in once the basis is known
  Eigen::VectorXd x0;
  VectorAt disturbance;  // omega(xi); empty means zero disturbance
  /// Output reference at absolute step t (>= 1); empty when the problem has no tracking term.
  std::function<Eigen::VectorXd(int)> reference;
  RunMode mode = RunMode::kOpenLoop;
  int closed_loop_steps = 0;
  std::vector<std::string> state_names;

  [[nodiscard]] int n_x() const { return system.n_x(); }
  [[nodiscard]] int n_u() const { return system.n_u(); }
  /// Discrete-time matrices at one parameter value.
  [[nodiscard]] DiscreteModel model_at(const Eigen::VectorXd& xi) const;
  /// Fills problem.tracking->y_ref for steps start+1 .. start+T.
  void apply_reference(MpcProblem& prob, int start) const;
  /// Throws DimensionMismatch if the pieces disagree.
  void validate() const;
};

/// Two-component correlated mixture used as the default parameter distribution.
GaussianMixture default_mixture();

struct ObstacleParams {
  double rho1 = 0.001;
  double rho2 = 0.05;
  bool deterministic = false;  // forces rho1 = rho2 = 0
  double offset = 28.0;        // g(x) = -x1 - x2 + offset
  int horizon = 4;
  double beta = 0.99;
  double u_max = 0.5;
  std::optional<GaussianMixture> mixture;
};
Scenario scenario_obstacle(const ObstacleParams& params = {});

struct VehicleParams {
  double vx = 20.0;
  double mass = 1270.0;
  double a = 1.015;
  double b = 1.895;
  double izz = 1536.7;
  double stiffness_per_deg = 967.0;  // nominal C_f = C_r in N/deg
  double spread = 0.08;              // C = C0 (1 + spread * xi)
  double dt = 0.05;
  DiscretizationMethod method = DiscretizationMethod::kZeroOrderHold;
  int horizon = 20;
  int steps = 80;
  double beta = 0.99;
  double delta_max = 0.5;  // steering bound, rad
  double e1_0 = 1.0;
  std::optional<GaussianMixture> mixture;
};
Scenario scenario_vehicle(const VehicleParams& params = {});

/// Hover linearization data; the model matrices are required.
struct QuadrotorParams {
  std::optional<Eigen::MatrixXd> A_c;  // 12 x 12 continuous-time
  std::optional<Eigen::MatrixXd> B_c;  // 12 x 4
  std::optional<Eigen::MatrixXd> D;    // 12 x 3 discrete-time; defaults to unit position rows
  double dt = 0.1;
  double u_eq = 192.8;
  double du_max = 100.0;
  double sigma = 0.02;  // omega = sigma * xi per step
  double attitude_max = 0.0872664626;
  double beta = 0.99;
  int horizon = 20;
  int steps = 150;
  std::string reference = "helix";  // or "step"
  double q_weight = 1e-2;
  double s_weight = 100.0;
  double r_weight = 1e-4;
  std::optional<GaussianMixture> mixture;
};
/// Throws MissingModelConfig if A_c or B_c is absent.
Scenario scenario_quadrotor(const QuadrotorParams& params);

/// Rigid-body quadrotor with rotor speeds as inputs.
struct QuadrotorPhysical {
  double mass = 0.65;
  double ixx = 7.5e-3;
  double iyy = 7.5e-3;
  double izz = 1.3e-2;
  double arm = 0.23;
  double drag = 7.5e-7;
  double hover_speed = 192.8;
  double gravity = 9.81;
  /// Thrust factor that makes hover_speed the equilibrium.
  [[nodiscard]] double thrust() const { return mass * gravity / (4.0 * hover_speed * hover_speed); }
};

/// Nonlinear state derivative; x = (x, x', y, y', z, z', phi, phi', theta, theta', psi, psi'), omega = rotor speeds.
Eigen::VectorXd quadrotor_rhs(const QuadrotorPhysical& q, const Eigen::VectorXd& x, const Eigen::Vector4d& omega);

/// Continuous-time (A_c, B_c) about hover at the origin, inputs as rotor-speed deviations.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> quadrotor_linearization(const QuadrotorPhysical& q);

/// Helix reference (2 cos 0.2t, 2 sin 0.2t, 0.2t) at time t seconds.
Eigen::Vector3d helix_reference(double t);

struct McReport {
  int n_samples = 0;
  Eigen::MatrixXd mean;  // (T+1) x n_x
  Eigen::MatrixXd std;   // (T+1) x n_x
  std::vector<double> violation_rate;  // per constraint, worst over its active steps
  std::vector<std::string> constraint_names;
  std::vector<double> ks_distance;  // filled by comparisons
  double wall_time_s = 0.0;
  std::optional<Eigen::MatrixXd> snapshot;  // n x n_x states at snapshot_step, if requested
  int snapshot_step = -1;
};

struct McOptions {
  std::uint64_t seed = 0;
  int snapshot_step = -1;
};

/// Simulates the true system once per parameter draw under a fixed input sequence (T x n_u).
McReport mc_propagate(const Scenario& sc, const Eigen::MatrixXd& u, int n, const McOptions& opts);

/// Same statistics computed on an explicit set of state samples per step (e.g. surrogate samples).
McReport mc_statistics(const std::vector<Eigen::MatrixXd>& states, const std::vector<AffineConstraint>& constraints,
                       int horizon);

struct McMpcResult {
  MpcSolution solution;  // x_traj is left empty; statistics live in the report
  McReport report;
};

/// Sample-average approximation of the open-loop problem with the same cone-margin solver.
McMpcResult mc_mpc(const Scenario& sc, int n, std::uint64_t seed, const SolverConfig& cfg);

/// Two-sample Kolmogorov-Smirnov statistic; values closer than tie_tol count as equal.
double compare_pdf(std::vector<double> a, std::vector<double> b, double tie_tol = 0.0);

}  // namespace sgmpc
