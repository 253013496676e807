#include "sgmpc/pipeline.hpp"

#include "sgmpc/error.hpp"

#include <chrono>

namespace sgmpc {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

}  // namespace

OrthonormalBasis build_basis(const GaussianMixture& gm, int p) {
  if (p < 1) throw Error(ErrorCode::kInvalidArgument, "polynomial order p must be >= 1");
  const MixtureMoments moments(gm, default_moment_cap(p));
  return gram_schmidt(moments, gm.dim(), p);
}

QuadratureRule build_rule(const GaussianMixture& gm, int p, const QuadConfig& cfg) {
  if (p < 1) throw Error(ErrorCode::kInvalidArgument, "polynomial order p must be >= 1");
  const MixtureMoments moments(gm, default_moment_cap(p));
  return generate(gm, gram_schmidt(moments, gm.dim(), 2 * p), cfg);
}

GalerkinSystem project_scenario(const Scenario& sc, const OrthonormalBasis& basis, const QuadratureRule& rule) {
  if (!sc.discretization) return project_matrices(sc.system, basis, rule);
  if (sc.discretization->method == DiscretizationMethod::kEuler) {
    return project_matrices(discretize_euler(sc.system, sc.discretization->dt), basis, rule);
  }
  return project_sampled([&sc](const Eigen::VectorXd& xi) { return sc.model_at(xi); }, basis, rule);
}

PipelineResult run_pipeline(const Scenario& sc, const PipelineConfig& cfg) {
  sc.validate();
  PipelineTimings tm;

  auto t0 = Clock::now();
  OrthonormalBasis basis = build_basis(sc.mixture, cfg.p);
  tm.basis_s = seconds_since(t0);

  PipelineResult res(std::move(basis));
  t0 = Clock::now();
  QuadConfig qc = cfg.quad;
  res.rule = build_rule(sc.mixture, cfg.p, qc);
  tm.quadrature_s = seconds_since(t0);

  t0 = Clock::now();
  res.gs = project_scenario(sc, res.basis, res.rule);
  tm.projection_s = seconds_since(t0);

  t0 = Clock::now();
  const int nb = res.basis.size();
  MpcProblem prob = sc.problem;
  prob.x_init = CoeffVector::deterministic(sc.x0, nb);
  sc.apply_reference(prob, 0);
  if (sc.disturbance) {
    const CoeffVector w = expand_function(sc.disturbance, res.basis, res.rule);
    res.w.assign(static_cast<std::size_t>(prob.T), w);
  }
  prob.validate(res.gs.n_x, res.gs.n_u, nb);
  res.problem = prob;

  if (sc.mode == RunMode::kOpenLoop) {
    const Condensed cond = condense(prob, res.gs, res.w, cfg.solver.eps_smooth);
    tm.conversion_s = seconds_since(t0);
    t0 = Clock::now();
    const ConeSolution cs = solve_cone_program(cond.program, cfg.solver);
    tm.solve_s = seconds_since(t0);

    MpcSolution sol;
    sol.u_star = Eigen::MatrixXd(prob.T, res.gs.n_u);
    for (int t = 0; t < prob.T; ++t) sol.u_star.row(t) = cs.z.segment(t * res.gs.n_u, res.gs.n_u).transpose();
    std::vector<CoeffVector> u_hat;
    for (int t = 0; t < prob.T; ++t) u_hat.push_back(CoeffVector::deterministic(sol.u_star.row(t).transpose(), nb));
    sol.x_traj = propagate(res.gs, prob.x_init, u_hat, res.w, prob.T);
    sol.objective = cs.objective;
    sol.margins = cs.margins;
    sol.stats = cs.stats;
    sol.status = cs.status;
    res.states = sol.x_traj;
    res.inputs = sol.u_star;
    res.status = sol.status;
    res.solutions.push_back(std::move(sol));
  } else {
    const std::vector<CoeffVector> w_step = res.w;
    StepHook hook = [&sc, &w_step](int step, MpcProblem& local, std::vector<CoeffVector>& w) {
      sc.apply_reference(local, step);
      w = w_step;
    };
    tm.conversion_s = seconds_since(t0);
    t0 = Clock::now();
    ClosedLoopRecord rec = receding_horizon(prob, res.gs, sc.closed_loop_steps, prob.T, hook, cfg.solver);
    tm.solve_s = seconds_since(t0);
    res.states = std::move(rec.states);
    res.inputs = std::move(rec.inputs);
    res.solutions = std::move(rec.solutions);
    res.status = SolveStatus::kOptimal;
    for (const auto& s : res.solutions) {
      if (s.status != SolveStatus::kOptimal) res.status = s.status;
    }
  }
  res.timings = tm;
  return res;
}

}  // namespace sgmpc
