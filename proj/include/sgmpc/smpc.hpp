#pragma once

#include "sgmpc/galerkin.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace sgmpc {

/// Chance constraint Pr[a^T x_t + b <= 0] >= beta at the listed steps.
struct AffineConstraint {
  Eigen::VectorXd a;
  double b = 0.0;
  double beta = 0.99;
  std::vector<int> active_times;  // steps in 1..T; empty means every step
  std::string name;

  /// Throws InvalidArgument unless 0.5 < beta < 1 and a != 0.
  void validate(int n_x) const;
};

/// kappa = sqrt(beta / (1 - beta)).
double kappa(double beta);

/// lo <= x_i <= hi as two one-sided chance constraints.
std::vector<AffineConstraint> box_constraints(int n_x, int index, double lo, double hi, double beta,
                                              const std::string& name);

/// (C x_t - y_ref)^T S (C x_t - y_ref) added to the stage cost.
struct Tracking {
  Eigen::MatrixXd C;
  Eigen::MatrixXd S;
  std::vector<Eigen::VectorXd> y_ref;  // entry t-1 for step t; a single entry applies to every step

  [[nodiscard]] const Eigen::VectorXd& ref(int t) const;
};

struct MpcProblem {
  int T = 1;
  Eigen::MatrixXd Q;
  Eigen::MatrixXd R;
  std::optional<Tracking> tracking;
  Eigen::VectorXd u_lower;  // empty: unbounded
  Eigen::VectorXd u_upper;
  std::vector<AffineConstraint> constraints;
  CoeffVector x_init;

  /// Throws InvalidArgument / DimensionMismatch on malformed data.
  void validate(int n_x, int n_u, int n_basis) const;
};

enum class SolveStatus { kOptimal, kMaxIters, kInfeasible };
const char* to_string(SolveStatus status);

struct SolverStats {
  int outer_iterations = 0;
  int inner_iterations = 0;
  double max_violation = 0.0;
  double runtime_s = 0.0;
  double final_rho = 0.0;
  std::vector<double> violation_history;  // accepted outer iterates, non-increasing
};

struct SolverConfig {
  int max_outer = 40;
  int max_inner = 200;
  double feas_tol = 1e-6;
  double opt_tol = 1e-10;
  double rho0 = 10.0;
  double rho_growth = 10.0;
  double rho_max = 1e14;
  double eps_smooth = 1e-12;
};

/// m(z) = a^T z + b + kappa * sqrt(||P z + p||^2 + eps); convex in z.
struct ConeMargin {
  Eigen::VectorXd a;
  double b = 0.0;
  Eigen::MatrixXd P;
  Eigen::VectorXd p;
  double kappa = 0.0;
  double eps = 1e-12;
  std::string label;

  [[nodiscard]] double value(const Eigen::VectorXd& z) const;
  [[nodiscard]] Eigen::VectorXd gradient(const Eigen::VectorXd& z) const;
  [[nodiscard]] Eigen::MatrixXd hessian(const Eigen::VectorXd& z) const;
};

/// min z^T H z + 2 h^T z + c  s.t.  m_i(z) <= 0,  lower <= z <= upper.
struct ConeProgram {
  Eigen::MatrixXd H;
  Eigen::VectorXd h;
  double c = 0.0;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  std::vector<ConeMargin> margins;

  [[nodiscard]] double objective(const Eigen::VectorXd& z) const;
  [[nodiscard]] Eigen::VectorXd objective_gradient(const Eigen::VectorXd& z) const;
  [[nodiscard]] double max_violation(const Eigen::VectorXd& z) const;
};

struct ConeSolution {
  Eigen::VectorXd z;
  double objective = 0.0;
  std::vector<double> margins;
  Eigen::VectorXd multipliers;
  SolveStatus status = SolveStatus::kOptimal;
  SolverStats stats;
};

/// Augmented Lagrangian on the margins with projected Newton inner iterations on the box.
ConeSolution solve_cone_program(const ConeProgram& prog, const SolverConfig& cfg,
                                const Eigen::VectorXd* warm_start = nullptr);

struct LiftedCost {
  Eigen::MatrixXd Q_hat;
  Eigen::MatrixXd R_hat;
};

/// Kronecker lifts matching the basis-major stacking of coefficient vectors (V (x) Q).
LiftedCost lift_cost(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R, const Eigen::MatrixXd& V);

/// E[g] + kappa * sqrt(Var[g] + eps) for g = a^T x + b.
double chance_margin(const AffineConstraint& c, const CoeffVector& x, double eps = 1e-12);

/// Inputs as decisions: x_hat_t = F[t] + G[t] z with z = [u_0; ...; u_{T-1}].
struct Condensed {
  ConeProgram program;
  std::vector<Eigen::VectorXd> F;
  std::vector<Eigen::MatrixXd> G;
};

Condensed condense(const MpcProblem& prob, const GalerkinSystem& gs, const std::vector<CoeffVector>& w,
                   double eps_smooth = 1e-12);

/// Expected cost of a lifted trajectory x_hat_0..x_hat_T under inputs u (T x n_u), by direct summation.
double trajectory_cost(const MpcProblem& prob, const GalerkinSystem& gs, const std::vector<CoeffVector>& x,
                       const Eigen::MatrixXd& u);

struct MpcSolution {
  Eigen::MatrixXd u_star;  // T x n_u
  std::vector<CoeffVector> x_traj;
  double objective = 0.0;
  std::vector<double> margins;  // one per (constraint, active step), in constraint order
  SolverStats stats;
  SolveStatus status = SolveStatus::kOptimal;
};

/// Solves the condensed surrogate problem. Infeasibility is reported through status.
MpcSolution solve_open_loop(const MpcProblem& prob, const GalerkinSystem& gs, const std::vector<CoeffVector>& w,
                            const SolverConfig& cfg);

struct ClosedLoopRecord {
  std::vector<CoeffVector> states;  // steps + 1 entries
  Eigen::MatrixXd inputs;           // steps x n_u
  std::vector<MpcSolution> solutions;
};

/// Called before each solve; may edit references or the disturbance sequence for that step.
using StepHook = std::function<void(int step, MpcProblem& prob, std::vector<CoeffVector>& w)>;

/// Solves, applies u_0, advances the lifted state, repeats. Throws Infeasible with the step index.
ClosedLoopRecord receding_horizon(const MpcProblem& prob, const GalerkinSystem& gs, int steps, int replan_horizon,
                                  const StepHook& hook, const SolverConfig& cfg);

}  // namespace sgmpc
