#pragma once

#include "sgmpc/bench.hpp"
#include "sgmpc/galerkin.hpp"
#include "sgmpc/polybasis.hpp"
#include "sgmpc/quadgen.hpp"
#include "sgmpc/smpc.hpp"

#include <utility>
#include <vector>

namespace sgmpc {

struct PipelineConfig {
  int p = 2;
  QuadConfig quad;
  SolverConfig solver;
};

/// Wall time per stage, seconds.
struct PipelineTimings {
  double basis_s = 0.0;
  double quadrature_s = 0.0;
  double projection_s = 0.0;
  double conversion_s = 0.0;
  double solve_s = 0.0;
  [[nodiscard]] double total_s() const { return basis_s + quadrature_s + projection_s + conversion_s + solve_s; }
};

struct PipelineResult {
  explicit PipelineResult(OrthonormalBasis b) : basis(std::move(b)) {}

  OrthonormalBasis basis;
  QuadratureRule rule;
  GalerkinSystem gs;
  MpcProblem problem;               // with x_init and the step-0 reference applied
  std::vector<CoeffVector> w;       // lifted disturbance per step (empty: none)
  std::vector<CoeffVector> states;  // lifted trajectory, t = 0 .. (T or closed-loop steps)
  Eigen::MatrixXd inputs;           // applied inputs, one row per step
  std::vector<MpcSolution> solutions;  // one per solve (a single entry in open loop)
  SolveStatus status = SolveStatus::kOptimal;
  PipelineTimings timings;
};

/// Basis and quadrature for a mixture (steps 1 and 2).
OrthonormalBasis build_basis(const GaussianMixture& gm, int p);
QuadratureRule build_rule(const GaussianMixture& gm, int p, const QuadConfig& cfg);

/// Lifted system for a scenario: polynomial projection, or sampled projection when discretized.
GalerkinSystem project_scenario(const Scenario& sc, const OrthonormalBasis& basis, const QuadratureRule& rule);

/// Full run in the scenario's mode. Open-loop infeasibility is reported through status;
/// receding mode throws Error(kInfeasible) like receding_horizon().
PipelineResult run_pipeline(const Scenario& sc, const PipelineConfig& cfg);

}  // namespace sgmpc
