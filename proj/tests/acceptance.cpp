// Property-based acceptance suite. One PASS/FAIL line per criterion; exit status 1 if any fails.

#include "sgmpc/bench.hpp"
#include "sgmpc/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

using namespace sgmpc;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;
};

void note(Outcome& o, bool ok, const char* fmt, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), fmt, a, b, c);
  if (!o.detail.empty()) o.detail += "; ";
  o.detail += buf;
  o.pass = o.pass && ok;
}

std::vector<double> column(const Eigen::MatrixXd& m, int c) {
  std::vector<double> v(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) v[static_cast<std::size_t>(i)] = m(i, c);
  return v;
}

// 1. Orthonormality, analytic and sampled.
Outcome basis_orthonormality() {
  Outcome o;
  const auto t0 = Clock::now();
  const GaussianMixture gm = default_mixture();
  const SampleBatch batch = sample(gm, 1000000, 2024);
  double worst_analytic = 0.0;
  double worst_z = 0.0;
  for (int p = 1; p <= 3; ++p) {
    const OrthonormalBasis basis = build_basis(gm, p);
    const MixtureMoments mm(gm, default_moment_cap(p));
    const Eigen::MatrixXd g = basis.coeffs() * moment_gram_matrix(mm, basis.order()) * basis.coeffs().transpose();
    worst_analytic = std::max(worst_analytic, (g - Eigen::MatrixXd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff());
    worst_analytic = std::max(worst_analytic, basis.gram_residual());

    const Eigen::MatrixXd psi = basis.evaluate_batch(batch.points);
    const double n = static_cast<double>(psi.rows());
    for (int i = 0; i < basis.size(); ++i) {
      for (int j = i; j < basis.size(); ++j) {
        const Eigen::ArrayXd prod = psi.col(i).array() * psi.col(j).array();
        const double mean = prod.mean();
        const double sd = std::sqrt((prod - mean).square().sum() / (n - 1.0));
        const double target = i == j ? 1.0 : 0.0;
        worst_z = std::max(worst_z, std::abs(mean - target) / (sd / std::sqrt(n)));
      }
    }
  }
  const double secs = since(t0);
  note(o, worst_analytic <= 1e-8, "analytic Gram residual %.2e (<= 1e-8)", worst_analytic);
  note(o, worst_z <= 5.0, "empirical Gram max deviation %.2f SE (<= 5)", worst_z);
  note(o, secs <= 10.0, "%.2f s (<= 10 s)", secs);
  return o;
}

struct RuleCase {
  std::string name;
  GaussianMixture gm;
  int p;
};

std::vector<RuleCase> rule_cases() {
  std::vector<RuleCase> cases;
  for (int p = 1; p <= 3; ++p) cases.push_back({"obstacle p=" + std::to_string(p), default_mixture(), p});
  cases.push_back({"vehicle p=2", scenario_vehicle().mixture, 2});
  QuadrotorParams qp;
  const auto [a, b] = quadrotor_linearization(QuadrotorPhysical{});
  qp.A_c = a;
  qp.B_c = b;
  cases.push_back({"quadrotor p=2", scenario_quadrotor(qp).mixture, 2});
  return cases;
}

// 2 and 3 share the generated rules.
struct RuleChecks {
  double worst_exactness = 0.0;
  double worst_moment = 0.0;
  double worst_gramian = 0.0;
  double gh_error = 0.0;
  int gh_nodes = 0;
};

const RuleChecks& rule_checks() {
  static const RuleChecks rc = [] {
    RuleChecks r;
    for (const auto& c : rule_cases()) {
      const QuadratureRule rule = build_rule(c.gm, c.p, QuadConfig{});
      const MixtureMoments mm(c.gm, default_moment_cap(c.p));
      const OrthonormalBasis b2p = gram_schmidt(mm, c.gm.dim(), 2 * c.p);
      Eigen::VectorXd e1 = Eigen::VectorXd::Zero(b2p.size());
      e1(0) = 1.0;
      const Eigen::VectorXd integ = basis_matrix(b2p, rule.nodes, b2p.size()) * rule.weights;
      r.worst_exactness = std::max(r.worst_exactness, (integ - e1).cwiseAbs().maxCoeff());
      const MonomialOrder order = graded_lex_indices(c.gm.dim(), 2 * c.p);
      for (int k = 0; k < order.size(); ++k) {
        double q = 0.0;
        for (int l = 0; l < rule.size(); ++l) {
          double mono = 1.0;
          for (int i = 0; i < c.gm.dim(); ++i) mono *= std::pow(rule.nodes(l, i), order[k][i]);
          q += rule.weights(l) * mono;
        }
        r.worst_moment = std::max(r.worst_moment, std::abs(q - raw_moment(c.gm, order[k])));
      }
      const OrthonormalBasis bp = build_basis(c.gm, c.p);
      const Eigen::MatrixXd v = gramian_v(bp, rule);
      r.worst_gramian = std::max(r.worst_gramian, (v - Eigen::MatrixXd::Identity(v.rows(), v.cols())).cwiseAbs().maxCoeff());
    }
    const QuadratureRule gh = build_rule(GaussianMixture::standard_normal(1), 2, QuadConfig{});
    r.gh_nodes = gh.size();
    if (gh.size() == 3) {
      std::vector<std::pair<double, double>> nw;
      for (int l = 0; l < 3; ++l) nw.emplace_back(gh.nodes(l, 0), gh.weights(l));
      std::sort(nw.begin(), nw.end());
      const double s3 = std::sqrt(3.0);
      const double nodes[3] = {-s3, 0.0, s3};
      const double weights[3] = {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0};
      for (int l = 0; l < 3; ++l) {
        r.gh_error = std::max({r.gh_error, std::abs(nw[static_cast<std::size_t>(l)].first - nodes[l]),
                               std::abs(nw[static_cast<std::size_t>(l)].second - weights[l])});
      }
    } else {
      r.gh_error = INFINITY;
    }
    return r;
  }();
  return rc;
}

Outcome quadrature_exactness() {
  Outcome o;
  const RuleChecks& r = rule_checks();
  note(o, r.worst_exactness <= 1e-8, "max |sum Psi_k w - delta_1k| %.2e (<= 1e-8)", r.worst_exactness);
  note(o, r.worst_moment <= 1e-7, "max raw moment error %.2e (<= 1e-7)", r.worst_moment);
  note(o, r.gh_nodes == 3 && r.gh_error <= 1e-6, "Gauss-Hermite M=%.0f, node/weight error %.2e (<= 1e-6)", r.gh_nodes,
       r.gh_error);
  return o;
}

Outcome gramian() {
  Outcome o;
  note(o, rule_checks().worst_gramian <= 1e-7, "max |V - I| %.2e over 5 rules (<= 1e-7)", rule_checks().worst_gramian);
  return o;
}

/// Stacked prediction x_1..x_T = Phi x0 + Gamma u for a fixed (A, B).
void prediction(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, int T, Eigen::MatrixXd& Phi, Eigen::MatrixXd& Gamma) {
  const auto nx = A.rows();
  const auto nu = B.cols();
  Phi = Eigen::MatrixXd::Zero(T * nx, nx);
  Gamma = Eigen::MatrixXd::Zero(T * nx, T * nu);
  Eigen::MatrixXd pw = Eigen::MatrixXd::Identity(nx, nx);
  for (int t = 1; t <= T; ++t) {
    pw = A * pw;
    Phi.block((t - 1) * nx, 0, nx, nx) = pw;
    for (int s = 0; s < t; ++s) {
      Eigen::MatrixXd m = B;
      for (int k = 0; k < t - 1 - s; ++k) m = A * m;
      Gamma.block((t - 1) * nx, s * nu, nx, nu) = m;
    }
  }
}

// 4. Zero-uncertainty reduction.
Outcome zero_uncertainty() {
  Outcome o;
  ObstacleParams op;
  op.deterministic = true;
  const Scenario sc = scenario_obstacle(op);
  const PipelineResult res = run_pipeline(sc, PipelineConfig{});
  const DiscreteModel dm = sc.model_at(Eigen::VectorXd::Zero(2));

  double sim_err = 0.0;
  double worst_g = -INFINITY;
  Eigen::VectorXd x = sc.x0;
  for (int t = 0; t <= sc.problem.T; ++t) {
    sim_err = std::max(sim_err, (res.states[static_cast<std::size_t>(t)].block(0) - x).cwiseAbs().maxCoeff());
    for (int k = 1; k < res.basis.size(); ++k) {
      sim_err = std::max(sim_err, res.states[static_cast<std::size_t>(t)].block(k).cwiseAbs().maxCoeff());
    }
    if (t >= 1) {
      for (const auto& c : sc.problem.constraints) worst_g = std::max(worst_g, c.a.dot(x) + c.b);
    }
    if (t < sc.problem.T) x = dm.A * x + dm.B * res.inputs.row(t).transpose();
  }
  const bool in_bounds = (res.inputs.array().abs() <= op.u_max + 1e-9).all();

  // Unconstrained instance vs the normal equations of the stacked quadratic.
  Scenario free = sc;
  free.problem.constraints.clear();
  free.problem.u_lower.resize(0);
  free.problem.u_upper.resize(0);
  const PipelineResult fr = run_pipeline(free, PipelineConfig{});
  Eigen::MatrixXd Phi, Gamma;
  const int T = sc.problem.T;
  prediction(dm.A, dm.B, T, Phi, Gamma);
  Eigen::MatrixXd Qbar = Eigen::MatrixXd::Zero(2 * T, 2 * T);
  for (int t = 0; t < T; ++t) Qbar.block(2 * t, 2 * t, 2, 2) = sc.problem.Q;
  const Eigen::MatrixXd Rbar = sc.problem.R(0, 0) * Eigen::MatrixXd::Identity(T, T);
  const Eigen::VectorXd u_oracle =
      -(Gamma.transpose() * Qbar * Gamma + Rbar).ldlt().solve(Gamma.transpose() * Qbar * Phi * sc.x0);
  Eigen::VectorXd u_free(T);
  for (int t = 0; t < T; ++t) u_free(t) = fr.inputs(t, 0);
  const double qp_err = (u_free - u_oracle).cwiseAbs().maxCoeff();

  note(o, sim_err <= 1e-12, "block-1 vs deterministic simulation %.2e (<= 1e-12)", sim_err);
  note(o, qp_err <= 1e-6, "unconstrained optimum vs closed form %.2e (<= 1e-6)", qp_err);
  note(o, worst_g <= 0.0 && in_bounds && res.status == SolveStatus::kOptimal,
       "max g(x_t) = %.3e (<= 0), inputs in bounds %.0f", worst_g, in_bounds ? 1.0 : 0.0);
  return o;
}

struct ObstacleRun {
  Scenario sc = scenario_obstacle();
  PipelineResult res = run_pipeline(sc, PipelineConfig{});
};

const ObstacleRun& obstacle_run() {
  static const ObstacleRun r;
  return r;
}

// 5. Moments and distribution of x_1 at step 2 against Monte Carlo.
Outcome moment_agreement() {
  Outcome o;
  const auto t0 = Clock::now();
  const ObstacleRun& run = obstacle_run();
  const int step = 2;
  const int n = 100000;
  const McReport mc = mc_propagate(run.sc, run.res.inputs, n, McOptions{77, step});
  const MeanVar mv = mean_var(run.res.states[step]);
  const double g_mean = mv.mean(0);
  const double g_std = std::sqrt(mv.var(0));
  const double rel_mean = std::abs(g_mean - mc.mean(step, 0)) / std::abs(mc.mean(step, 0));
  const double rel_std = std::abs(g_std - mc.std(step, 0)) / mc.std(step, 0);
  const SampleBatch batch = sample(run.sc.mixture, n, 78);
  const Eigen::MatrixXd sur = sample_surrogate(run.res.states[step], run.res.basis, batch.points);
  const double ks = compare_pdf(column(sur, 0), column(*mc.snapshot, 0));
  const double secs = since(t0) + run.res.timings.total_s();
  note(o, rel_mean <= 0.01, "mean rel. error %.2e (<= 1e-2)", rel_mean);
  note(o, rel_std <= 0.03, "std rel. error %.2e (<= 3e-2)", rel_std);
  note(o, ks <= 0.05, "KS %.4f (<= 0.05)", ks);
  note(o, secs <= 60.0, "%.2f s (<= 60 s)", secs);
  return o;
}

// 6. Empirical violation rates on surrogate samples at the optimum.
Outcome chance_validity() {
  Outcome o;
  const ObstacleRun& run = obstacle_run();
  const SampleBatch batch = sample(run.sc.mixture, 100000, 79);
  std::vector<Eigen::MatrixXd> states;
  for (const auto& x : run.res.states) states.push_back(sample_surrogate(x, run.res.basis, batch.points));
  const McReport r = mc_statistics(states, run.sc.problem.constraints, run.sc.problem.T);
  const double worst = *std::max_element(r.violation_rate.begin(), r.violation_rate.end());
  note(o, run.res.status == SolveStatus::kOptimal && worst <= 0.015,
       "worst violation rate %.5f over %.0f constraints (<= 0.015)", worst,
       static_cast<double>(r.violation_rate.size()));
  return o;
}

// 7. Analytic gradients against central differences.
Outcome gradients() {
  Outcome o;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> beta_d(0.6, 0.995);
  const OrthonormalBasis basis = build_basis(default_mixture(), 2);
  const QuadratureRule rule = build_rule(default_mixture(), 2, QuadConfig{});
  const Scenario obs = scenario_obstacle();
  const GalerkinSystem gs_obs = project_scenario(obs, basis, rule);
  const Scenario veh = scenario_vehicle();
  const OrthonormalBasis vb = build_basis(veh.mixture, 2);
  const QuadratureRule vr = build_rule(veh.mixture, 2, QuadConfig{});
  const GalerkinSystem gs_veh = project_scenario(veh, vb, vr);

  auto rel_err = [](const Eigen::VectorXd& g, const Eigen::VectorXd& fd) {
    return (g - fd).norm() / std::max(g.norm(), 1e-8);
  };
  double worst = 0.0;
  int checked = 0;
  for (int inst = 0; inst < 50; ++inst) {
    const bool use_vehicle = inst % 2 == 1;
    const GalerkinSystem& gs = use_vehicle ? gs_veh : gs_obs;
    const Scenario& sc = use_vehicle ? veh : obs;
    const int nx = gs.n_x;
    MpcProblem prob = sc.problem;
    prob.T = use_vehicle ? 6 : 4;
    prob.tracking.reset();
    Eigen::VectorXd qd(nx);
    for (int i = 0; i < nx; ++i) qd(i) = 0.5 + std::abs(u(rng)) * 10.0;
    prob.Q = qd.asDiagonal();
    prob.R = (0.1 + std::abs(u(rng))) * Eigen::MatrixXd::Identity(gs.n_u, gs.n_u);
    prob.constraints.clear();
    for (int k = 0; k < 3; ++k) {
      AffineConstraint c;
      c.a = Eigen::VectorXd(nx);
      for (int i = 0; i < nx; ++i) c.a(i) = u(rng);
      c.b = 5.0 * u(rng);
      c.beta = beta_d(rng);
      prob.constraints.push_back(c);
    }
    prob.x_init = CoeffVector::deterministic(sc.x0, gs.n_basis);
    const Condensed cond = condense(prob, gs, {}, 1e-12);
    const int m = static_cast<int>(cond.program.h.size());
    Eigen::VectorXd z(m);
    for (int i = 0; i < m; ++i) z(i) = u(rng);

    auto fd = [&](const std::function<double(const Eigen::VectorXd&)>& f) {
      Eigen::VectorXd g(m);
      for (int i = 0; i < m; ++i) {
        const double h = 1e-5 * std::max(1.0, std::abs(z(i)));
        Eigen::VectorXd zp = z, zm = z;
        zp(i) += h;
        zm(i) -= h;
        g(i) = (f(zp) - f(zm)) / (2.0 * h);
      }
      return g;
    };
    worst = std::max(worst, rel_err(cond.program.objective_gradient(z),
                                     fd([&](const Eigen::VectorXd& v) { return cond.program.objective(v); })));
    ++checked;
    for (const auto& mg : cond.program.margins) {
      worst = std::max(worst, rel_err(mg.gradient(z), fd([&](const Eigen::VectorXd& v) { return mg.value(v); })));
      ++checked;
    }
  }
  note(o, worst <= 1e-5, "worst relative error %.2e over %.0f gradients in 50 instances (<= 1e-5)", worst,
       static_cast<double>(checked));
  return o;
}

// 8. Receding-horizon vehicle regulation.
Outcome vehicle_regulation() {
  Outcome o;
  const auto t0 = Clock::now();
  const Scenario sc = scenario_vehicle();
  const PipelineResult res = run_pipeline(sc, PipelineConfig{});
  const double secs = since(t0);
  const double e1_final = std::abs(res.states.back().block(0)(0));
  double worst_solve = -INFINITY;
  for (const auto& s : res.solutions) {
    for (double m : s.margins) worst_solve = std::max(worst_solve, m);
  }
  double worst_applied = -INFINITY;
  for (std::size_t t = 1; t < res.states.size(); ++t) {
    for (const auto& c : sc.problem.constraints) worst_applied = std::max(worst_applied, chance_margin(c, res.states[t]));
  }
  const double tol = PipelineConfig{}.solver.feas_tol;
  note(o, e1_final <= 0.05, "|mean e1(final)| %.2e m (<= 0.05)", e1_final);
  note(o, worst_solve <= tol && worst_applied <= tol, "max chance margin: planned %.2e, applied %.2e (<= 1e-6)",
       worst_solve, worst_applied);
  note(o, secs <= 300.0, "%.2f s (<= 300 s)", secs);
  return o;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

// 9. Galerkin pipeline vs 5000-sample Monte Carlo MPC wall time.
Outcome speed_ratio() {
  Outcome o;
  const Scenario sc = scenario_obstacle();
  std::vector<double> gal, mc;
  for (int rep = 0; rep < 5; ++rep) {
    gal.push_back(run_pipeline(sc, PipelineConfig{}).timings.total_s());
    mc.push_back(mc_mpc(sc, 5000, static_cast<std::uint64_t>(rep), SolverConfig{}).report.wall_time_s);
  }
  const double g = median(gal);
  const double m = median(mc);
  note(o, m / g >= 5.0, "ratio %.2f (>= 5); Galerkin %.4f s, MC-MPC %.4f s (medians of 5)", m / g, g, m);
  return o;
}

// 10. Quadrotor helix tracking and attitude chance constraints.
Outcome quadrotor() {
  Outcome o;
  QuadrotorParams qp;
  const auto [a, b] = quadrotor_linearization(QuadrotorPhysical{});
  qp.A_c = a;
  qp.B_c = b;
  const Scenario sc = scenario_quadrotor(qp);
  const PipelineResult res = run_pipeline(sc, PipelineConfig{});
  const int transient = static_cast<int>(std::lround(5.0 / qp.dt));
  const int steps = static_cast<int>(res.states.size()) - 1;
  std::vector<double> err;
  for (int t = 1; t <= steps; ++t) {
    const Eigen::VectorXd m = res.states[static_cast<std::size_t>(t)].block(0);
    const Eigen::Vector3d pos(m(0), m(2), m(4));
    err.push_back((pos - helix_reference(qp.dt * t)).norm());
  }
  auto window_mean = [&](int from, int to) {
    double s = 0.0;
    for (int t = from; t <= to; ++t) s += err[static_cast<std::size_t>(t - 1)];
    return s / (to - from + 1);
  };
  const double early = window_mean(1, 10);
  const double after = window_mean(transient + 1, steps);
  const double late_max = *std::max_element(err.begin() + transient, err.end());

  const SampleBatch batch = sample(sc.mixture, 100000, 80);
  std::vector<Eigen::MatrixXd> states;
  for (const auto& x : res.states) states.push_back(sample_surrogate(x, res.basis, batch.points));
  const McReport r = mc_statistics(states, sc.problem.constraints, steps);
  const double worst = *std::max_element(r.violation_rate.begin(), r.violation_rate.end());
  note(o, after < early && after <= 0.05 * early,
       "mean tracking error first 1 s %.3e m, after %.0f s transient %.3e m (<= 5%% of initial)", early, 5.0, after);
  note(o, late_max <= 0.05 * early, "max post-transient error %.3e m", late_max);
  note(o, worst <= 0.015, "worst attitude violation rate %.5f (<= 0.015)", worst);
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"basis orthonormality", basis_orthonormality},
      {"quadrature exactness", quadrature_exactness},
      {"gramian identity", gramian},
      {"zero-uncertainty reduction", zero_uncertainty},
      {"moment agreement", moment_agreement},
      {"chance-constraint validity", chance_validity},
      {"gradient correctness", gradients},
      {"vehicle regulation", vehicle_regulation},
      {"speed ratio", speed_ratio},
      {"quadrotor helix", quadrotor},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += o.pass ? 0 : 1;
    std::printf("[%s] %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed == 0 ? 0 : 1;
}
