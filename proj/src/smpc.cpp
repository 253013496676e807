#include "sgmpc/smpc.hpp"

#include "sgmpc/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace sgmpc {

namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 60;
constexpr double kRhoStallRatio = 0.25;

bool is_symmetric(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

bool is_positive_definite(const Eigen::MatrixXd& m) {
  return is_symmetric(m) && Eigen::LLT<Eigen::MatrixXd>(m).info() == Eigen::Success;
}

bool is_psd(const Eigen::MatrixXd& m) {
  if (!is_symmetric(m)) return false;
  if (m.size() == 0) return true;
  const double lo = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  return lo >= -1e-10 * std::max(1.0, m.cwiseAbs().maxCoeff());
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  }
  return out;
}

Eigen::VectorXd project_box(const Eigen::VectorXd& z, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  return z.cwiseMax(lo).cwiseMin(hi);
}

std::vector<int> active_steps(const AffineConstraint& c, int T) {
  std::vector<int> steps;
  if (c.active_times.empty()) {
    for (int t = 1; t <= T; ++t) steps.push_back(t);
  } else {
    for (int t : c.active_times) {
      if (t >= 1 && t <= T) steps.push_back(t);
    }
  }
  return steps;
}

Eigen::MatrixXd state_weight(const MpcProblem& prob) {
  Eigen::MatrixXd q = prob.Q;
  if (prob.tracking) q += prob.tracking->C.transpose() * prob.tracking->S * prob.tracking->C;
  return q;
}

/// Augmented Lagrangian merit for inequality margins (PHR form).
class Merit {
 public:
  Merit(const ConeProgram& prog, const Eigen::VectorXd& lambda, double rho)
      : prog_(prog), lambda_(lambda), rho_(rho) {}

  double value(const Eigen::VectorXd& z) const {
    double f = prog_.objective(z);
    for (std::size_t i = 0; i < prog_.margins.size(); ++i) {
      const double l = lambda_(static_cast<Eigen::Index>(i));
      const double s = std::max(0.0, l + rho_ * prog_.margins[i].value(z));
      f += (s * s - l * l) / (2.0 * rho_);
    }
    return f;
  }

  void derivatives(const Eigen::VectorXd& z, Eigen::VectorXd& g, Eigen::MatrixXd& hess) const {
    g = prog_.objective_gradient(z);
    hess = 2.0 * prog_.H;
    for (std::size_t i = 0; i < prog_.margins.size(); ++i) {
      const ConeMargin& m = prog_.margins[i];
      const double s = lambda_(static_cast<Eigen::Index>(i)) + rho_ * m.value(z);
      if (s <= 0.0) continue;
      const Eigen::VectorXd gm = m.gradient(z);
      g += s * gm;
      hess += rho_ * gm * gm.transpose() + s * m.hessian(z);
    }
  }

 private:
  const ConeProgram& prog_;
  const Eigen::VectorXd& lambda_;
  double rho_;
};

struct InnerResult {
  int iterations = 0;
  bool converged = false;
};

/// Projected Newton with an epsilon-active set on the box.
InnerResult projected_newton(const Merit& merit, const ConeProgram& prog, Eigen::VectorXd& z, const SolverConfig& cfg) {
  InnerResult res;
  const Eigen::Index n = z.size();
  Eigen::VectorXd g;
  Eigen::MatrixXd hess;
  double f = merit.value(z);
  double tol = -1.0;
  for (; res.iterations < cfg.max_inner; ++res.iterations) {
    merit.derivatives(z, g, hess);
    const Eigen::VectorXd pg = project_box(z - g, prog.lower, prog.upper) - z;
    const double pg_norm = pg.cwiseAbs().maxCoeff();
    if (tol < 0.0) tol = cfg.opt_tol * std::max(1.0, g.cwiseAbs().maxCoeff());
    if (pg_norm <= tol) {
      res.converged = true;
      break;
    }

    const double eps_active = std::min(1e-8, pg_norm);
    std::vector<int> free;
    std::vector<int> fixed;
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool at_lo = z(i) <= prog.lower(i) + eps_active && g(i) > 0.0;
      const bool at_hi = z(i) >= prog.upper(i) - eps_active && g(i) < 0.0;
      (at_lo || at_hi ? fixed : free).push_back(static_cast<int>(i));
    }

    Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
    if (!free.empty()) {
      Eigen::MatrixXd hff = hess(free, free);
      Eigen::VectorXd gf = g(free);
      Eigen::LLT<Eigen::MatrixXd> llt(hff);
      double shift = 0.0;
      while (llt.info() != Eigen::Success) {
        shift = shift == 0.0 ? 1e-12 * std::max(1.0, hff.diagonal().cwiseAbs().maxCoeff()) : shift * 10.0;
        llt.compute(hff + shift * Eigen::MatrixXd::Identity(hff.rows(), hff.cols()));
      }
      const Eigen::VectorXd df = -llt.solve(gf);
      for (std::size_t k = 0; k < free.size(); ++k) d(free[k]) = df(static_cast<Eigen::Index>(k));
    }
    for (int i : fixed) d(i) = -g(i) / std::max(hess(i, i), 1e-12);

    double alpha = 1.0;
    bool accepted = false;
    Eigen::VectorXd trial;
    double f_trial = f;
    for (int bt = 0; bt < kMaxBacktracks; ++bt, alpha *= 0.5) {
      trial = project_box(z + alpha * d, prog.lower, prog.upper);
      const double decrease = g.dot(trial - z);
      f_trial = merit.value(trial);
      if (decrease < 0.0 && f_trial <= f + kArmijo * decrease) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // Projected gradient fallback.
      alpha = 1.0 / std::max(1e-12, hess.diagonal().cwiseAbs().maxCoeff());
      for (int bt = 0; bt < kMaxBacktracks; ++bt, alpha *= 0.5) {
        trial = project_box(z - alpha * g, prog.lower, prog.upper);
        const double decrease = g.dot(trial - z);
        f_trial = merit.value(trial);
        if (decrease < 0.0 && f_trial <= f + kArmijo * decrease) {
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) {
      // No representable decrease left; treat as converged to working precision.
      res.converged = pg_norm <= 1e3 * tol;
      break;
    }
    const double step = (trial - z).cwiseAbs().maxCoeff();
    z = trial;
    const double df = f - f_trial;
    f = f_trial;
    if (step <= 1e-15 * std::max(1.0, z.cwiseAbs().maxCoeff()) && df <= 1e-16 * std::max(1.0, std::abs(f))) {
      res.converged = true;
      ++res.iterations;
      break;
    }
  }
  return res;
}

Eigen::MatrixXd inputs_from(const Eigen::VectorXd& z, int T, int n_u) {
  Eigen::MatrixXd u(T, n_u);
  for (int t = 0; t < T; ++t) u.row(t) = z.segment(t * n_u, n_u).transpose();
  return u;
}

std::vector<CoeffVector> lifted_inputs(const Eigen::MatrixXd& u, int n_basis) {
  std::vector<CoeffVector> out;
  out.reserve(static_cast<std::size_t>(u.rows()));
  for (Eigen::Index t = 0; t < u.rows(); ++t) out.push_back(CoeffVector::deterministic(u.row(t).transpose(), n_basis));
  return out;
}

MpcSolution to_mpc_solution(const MpcProblem& prob, const GalerkinSystem& gs, const std::vector<CoeffVector>& w,
                            const ConeSolution& cs) {
  MpcSolution sol;
  sol.u_star = inputs_from(cs.z, prob.T, gs.n_u);
  sol.x_traj = propagate(gs, prob.x_init, lifted_inputs(sol.u_star, gs.n_basis), w, prob.T);
  sol.objective = cs.objective;
  sol.margins = cs.margins;
  sol.stats = cs.stats;
  sol.status = cs.status;
  return sol;
}

}  // namespace

void AffineConstraint::validate(int n_x) const {
  if (a.size() != n_x) throw Error(ErrorCode::kDimensionMismatch, "constraint '" + name + "' has wrong length");
  if (!(beta > 0.5 && beta < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "constraint '" + name + "': beta must lie in (0.5, 1)");
  }
  if (a.cwiseAbs().maxCoeff() == 0.0) throw Error(ErrorCode::kInvalidArgument, "constraint '" + name + "': a = 0");
}

double kappa(double beta) {
  if (!(beta > 0.5 && beta < 1.0)) throw Error(ErrorCode::kInvalidArgument, "beta must lie in (0.5, 1)");
  return std::sqrt(beta / (1.0 - beta));
}

std::vector<AffineConstraint> box_constraints(int n_x, int index, double lo, double hi, double beta,
                                              const std::string& name) {
  if (index < 0 || index >= n_x) throw Error(ErrorCode::kDimensionMismatch, "box constraint state index");
  if (!(lo < hi)) throw Error(ErrorCode::kInvalidArgument, "box constraint '" + name + "' needs lo < hi");
  AffineConstraint upper;
  upper.a = Eigen::VectorXd::Unit(n_x, index);
  upper.b = -hi;
  upper.beta = beta;
  upper.name = name + "_max";
  AffineConstraint lower;
  lower.a = -Eigen::VectorXd::Unit(n_x, index);
  lower.b = lo;
  lower.beta = beta;
  lower.name = name + "_min";
  return {upper, lower};
}

const Eigen::VectorXd& Tracking::ref(int t) const {
  if (y_ref.empty()) throw Error(ErrorCode::kInvalidArgument, "tracking reference is empty");
  if (y_ref.size() == 1) return y_ref.front();
  if (t < 1 || static_cast<std::size_t>(t) > y_ref.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "tracking reference too short for step " + std::to_string(t));
  }
  return y_ref[static_cast<std::size_t>(t - 1)];
}

void MpcProblem::validate(int n_x, int n_u, int n_basis) const {
  if (T < 1) throw Error(ErrorCode::kInvalidArgument, "horizon must be >= 1");
  if (Q.rows() != n_x || Q.cols() != n_x) throw Error(ErrorCode::kDimensionMismatch, "Q must be n_x x n_x");
  if (R.rows() != n_u || R.cols() != n_u) throw Error(ErrorCode::kDimensionMismatch, "R must be n_u x n_u");
  if (!is_positive_definite(Q)) throw Error(ErrorCode::kInvalidArgument, "Q must be symmetric positive definite");
  if (!is_positive_definite(R)) throw Error(ErrorCode::kInvalidArgument, "R must be symmetric positive definite");
  if (u_lower.size() != u_upper.size() || (u_lower.size() != 0 && u_lower.size() != n_u)) {
    throw Error(ErrorCode::kDimensionMismatch, "input bounds must be empty or length n_u");
  }
  for (Eigen::Index i = 0; i < u_lower.size(); ++i) {
    if (!(u_lower(i) <= u_upper(i))) throw Error(ErrorCode::kInvalidArgument, "input bound lower > upper");
  }
  for (const auto& c : constraints) c.validate(n_x);
  if (x_init.base_dim() != n_x || x_init.n_basis() != n_basis) {
    throw Error(ErrorCode::kDimensionMismatch, "initial coefficients do not match the lifted system");
  }
  if (tracking) {
    const auto& tr = *tracking;
    if (tr.C.cols() != n_x) throw Error(ErrorCode::kDimensionMismatch, "tracking C must have n_x columns");
    if (tr.S.rows() != tr.C.rows() || tr.S.cols() != tr.C.rows()) {
      throw Error(ErrorCode::kDimensionMismatch, "tracking S must be n_y x n_y");
    }
    if (!is_psd(tr.S)) throw Error(ErrorCode::kInvalidArgument, "tracking S must be symmetric positive semidefinite");
    if (tr.y_ref.empty() || (tr.y_ref.size() != 1 && static_cast<int>(tr.y_ref.size()) < T)) {
      throw Error(ErrorCode::kDimensionMismatch, "tracking reference needs 1 or T entries");
    }
    for (const auto& y : tr.y_ref) {
      if (y.size() != tr.C.rows()) throw Error(ErrorCode::kDimensionMismatch, "tracking reference length");
    }
  }
}

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal:
      return "Optimal";
    case SolveStatus::kMaxIters:
      return "MaxIters";
    case SolveStatus::kInfeasible:
      return "Infeasible";
  }
  return "Unknown";
}

double ConeMargin::value(const Eigen::VectorXd& z) const {
  const double lin = a.dot(z) + b;
  if (P.rows() == 0) return lin + kappa * std::sqrt(eps);
  return lin + kappa * std::sqrt((P * z + p).squaredNorm() + eps);
}

Eigen::VectorXd ConeMargin::gradient(const Eigen::VectorXd& z) const {
  if (P.rows() == 0) return a;
  const Eigen::VectorXd r = P * z + p;
  const double s = std::sqrt(r.squaredNorm() + eps);
  return a + (kappa / s) * (P.transpose() * r);
}

Eigen::MatrixXd ConeMargin::hessian(const Eigen::VectorXd& z) const {
  if (P.rows() == 0) return Eigen::MatrixXd::Zero(z.size(), z.size());
  const Eigen::VectorXd r = P * z + p;
  const double s = std::sqrt(r.squaredNorm() + eps);
  const Eigen::VectorXd q = P.transpose() * r;
  return kappa * (P.transpose() * P / s - q * q.transpose() / (s * s * s));
}

double ConeProgram::objective(const Eigen::VectorXd& z) const { return z.dot(H * z) + 2.0 * h.dot(z) + c; }

Eigen::VectorXd ConeProgram::objective_gradient(const Eigen::VectorXd& z) const { return 2.0 * (H * z + h); }

double ConeProgram::max_violation(const Eigen::VectorXd& z) const {
  double v = 0.0;
  for (const auto& m : margins) v = std::max(v, m.value(z));
  return v;
}

ConeSolution solve_cone_program(const ConeProgram& prog, const SolverConfig& cfg, const Eigen::VectorXd* warm_start) {
  const auto start = std::chrono::steady_clock::now();
  const Eigen::Index n = prog.H.rows();
  if (prog.H.cols() != n || prog.h.size() != n || prog.lower.size() != n || prog.upper.size() != n) {
    throw Error(ErrorCode::kDimensionMismatch, "cone program shapes");
  }
  Eigen::VectorXd z = warm_start && warm_start->size() == n ? *warm_start : Eigen::VectorXd::Zero(n);
  z = project_box(z, prog.lower, prog.upper);

  const auto n_m = static_cast<Eigen::Index>(prog.margins.size());
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(n_m);
  double rho = cfg.rho0;

  ConeSolution out;
  bool have_feasible = false;
  Eigen::VectorXd best_feasible;
  Eigen::VectorXd least_violating = z;
  double least_violation = std::numeric_limits<double>::infinity();
  double last_accepted = std::numeric_limits<double>::infinity();
  double v_prev = std::numeric_limits<double>::infinity();
  bool converged = false;

  for (int outer = 0; outer < std::max(1, cfg.max_outer); ++outer) {
    const Merit merit(prog, lambda, rho);
    const InnerResult inner = projected_newton(merit, prog, z, cfg);
    out.stats.inner_iterations += inner.iterations;
    out.stats.outer_iterations = outer + 1;

    Eigen::VectorXd m(n_m);
    for (Eigen::Index i = 0; i < n_m; ++i) m(i) = prog.margins[static_cast<std::size_t>(i)].value(z);
    const double v = n_m > 0 ? std::max(0.0, m.maxCoeff()) : 0.0;
    if (v <= last_accepted) {
      last_accepted = v;
      out.stats.violation_history.push_back(v);
    }
    if (v < least_violation) {
      least_violation = v;
      least_violating = z;
    }
    if (v <= cfg.feas_tol) {
      have_feasible = true;
      best_feasible = z;
    }

    if (n_m == 0) {
      converged = inner.converged;
      break;
    }
    const Eigen::VectorXd lambda_new = (lambda + rho * m).cwiseMax(0.0);
    bool complementary = true;
    for (Eigen::Index i = 0; i < n_m; ++i) {
      if (lambda_new(i) > 0.0 && std::abs(m(i)) > cfg.feas_tol) complementary = false;
    }
    lambda = lambda_new;
    if (v <= cfg.feas_tol && complementary && inner.converged) {
      converged = true;
      break;
    }
    if (v > kRhoStallRatio * v_prev) rho = std::min(rho * cfg.rho_growth, cfg.rho_max);
    v_prev = v;
  }

  if (converged) {
    out.status = SolveStatus::kOptimal;
  } else if (have_feasible) {
    z = best_feasible;
    out.status = SolveStatus::kMaxIters;
  } else {
    z = least_violating;
    out.status = SolveStatus::kInfeasible;
  }
  out.z = z;
  out.objective = prog.objective(z);
  out.margins.reserve(prog.margins.size());
  for (const auto& mg : prog.margins) out.margins.push_back(mg.value(z));
  out.multipliers = lambda;
  out.stats.max_violation = prog.max_violation(z);
  out.stats.final_rho = rho;
  out.stats.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

LiftedCost lift_cost(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R, const Eigen::MatrixXd& V) {
  if (V.rows() != V.cols()) throw Error(ErrorCode::kDimensionMismatch, "V must be square");
  return {kron(V, Q), kron(V, R)};
}

double chance_margin(const AffineConstraint& c, const CoeffVector& x, double eps) {
  if (c.a.size() != x.base_dim()) throw Error(ErrorCode::kDimensionMismatch, "constraint/state dimension");
  const Eigen::VectorXd g = x.as_matrix().transpose() * c.a;  // g_k = a^T c_k
  const double var = g.tail(g.size() - 1).squaredNorm();
  return g(0) + c.b + kappa(c.beta) * std::sqrt(var + eps);
}

Condensed condense(const MpcProblem& prob, const GalerkinSystem& gs, const std::vector<CoeffVector>& w,
                   double eps_smooth) {
  prob.validate(gs.n_x, gs.n_u, gs.n_basis);
  if (!w.empty() && static_cast<int>(w.size()) < prob.T) {
    throw Error(ErrorCode::kDimensionMismatch, "disturbance sequence shorter than the horizon");
  }
  const int T = prob.T;
  const int nx = gs.n_x;
  const int nu = gs.n_u;
  const int nb = gs.n_basis;
  const int n = nx * nb;
  const int m = T * nu;

  Condensed out;
  out.F.resize(static_cast<std::size_t>(T + 1));
  out.G.resize(static_cast<std::size_t>(T + 1));
  out.F[0] = prob.x_init.stacked();
  out.G[0] = Eigen::MatrixXd::Zero(n, m);
  const Eigen::MatrixXd b_mean = gs.B_mean();
  for (int t = 0; t < T; ++t) {
    const auto i = static_cast<std::size_t>(t);
    out.F[i + 1] = gs.A_hat * out.F[i];
    if (!w.empty()) out.F[i + 1] += gs.D_hat * w[i].stacked();
    out.G[i + 1] = gs.A_hat * out.G[i];
    out.G[i + 1].middleCols(t * nu, nu) += b_mean;
  }

  ConeProgram& prog = out.program;
  const Eigen::MatrixXd L = kron(gs.V, state_weight(prob));
  prog.H = Eigen::MatrixXd::Zero(m, m);
  prog.h = Eigen::VectorXd::Zero(m);
  prog.c = 0.0;
  for (int t = 1; t <= T; ++t) {
    const auto i = static_cast<std::size_t>(t);
    const Eigen::MatrixXd LG = L * out.G[i];
    prog.H.noalias() += out.G[i].transpose() * LG;
    prog.h.noalias() += LG.transpose() * out.F[i];
    prog.c += out.F[i].dot(L * out.F[i]);
    if (prob.tracking) {
      const auto& tr = *prob.tracking;
      const Eigen::VectorXd csy = tr.C.transpose() * (tr.S * tr.ref(t));
      prog.h.noalias() -= out.G[i].topRows(nx).transpose() * csy;
      prog.c += -2.0 * csy.dot(out.F[i].head(nx)) + tr.ref(t).dot(tr.S * tr.ref(t));
    }
  }
  const double v11 = gs.V(0, 0);
  for (int t = 0; t < T; ++t) prog.H.block(t * nu, t * nu, nu, nu) += v11 * prob.R;
  prog.H = 0.5 * (prog.H + prog.H.transpose());

  prog.lower = Eigen::VectorXd::Constant(m, -std::numeric_limits<double>::infinity());
  prog.upper = Eigen::VectorXd::Constant(m, std::numeric_limits<double>::infinity());
  if (prob.u_lower.size() == nu) {
    for (int t = 0; t < T; ++t) {
      prog.lower.segment(t * nu, nu) = prob.u_lower;
      prog.upper.segment(t * nu, nu) = prob.u_upper;
    }
  }

  for (const auto& c : prob.constraints) {
    const double kap = kappa(c.beta);
    for (int t : active_steps(c, T)) {
      const auto i = static_cast<std::size_t>(t);
      // Row k: a^T (block k of x_hat_t) as an affine function of z.
      Eigen::MatrixXd rows(nb, m);
      Eigen::VectorXd offs(nb);
      for (int k = 0; k < nb; ++k) {
        rows.row(k) = c.a.transpose() * out.G[i].middleRows(k * nx, nx);
        offs(k) = c.a.dot(out.F[i].segment(k * nx, nx));
      }
      ConeMargin cm;
      cm.a = rows.row(0).transpose();
      cm.b = offs(0) + c.b;
      cm.P = rows.bottomRows(nb - 1);
      cm.p = offs.tail(nb - 1);
      cm.kappa = kap;
      cm.eps = eps_smooth;
      cm.label = c.name + "@" + std::to_string(t);
      prog.margins.push_back(std::move(cm));
    }
  }
  return out;
}

double trajectory_cost(const MpcProblem& prob, const GalerkinSystem& gs, const std::vector<CoeffVector>& x,
                       const Eigen::MatrixXd& u) {
  if (static_cast<int>(x.size()) != prob.T + 1 || u.rows() != prob.T) {
    throw Error(ErrorCode::kDimensionMismatch, "trajectory length");
  }
  const LiftedCost lc = lift_cost(state_weight(prob), prob.R, gs.V);
  double j = 0.0;
  for (int t = 1; t <= prob.T; ++t) {
    const Eigen::VectorXd& xt = x[static_cast<std::size_t>(t)].stacked();
    j += xt.dot(lc.Q_hat * xt);
    if (prob.tracking) {
      const auto& tr = *prob.tracking;
      const Eigen::VectorXd& y = tr.ref(t);
      j += -2.0 * y.dot(tr.S * (tr.C * xt.head(gs.n_x))) + y.dot(tr.S * y);
    }
  }
  for (int t = 0; t < prob.T; ++t) {
    const Eigen::VectorXd uh = CoeffVector::deterministic(u.row(t).transpose(), gs.n_basis).stacked();
    j += uh.dot(lc.R_hat * uh);
  }
  return j;
}

MpcSolution solve_open_loop(const MpcProblem& prob, const GalerkinSystem& gs, const std::vector<CoeffVector>& w,
                            const SolverConfig& cfg) {
  const Condensed cond = condense(prob, gs, w, cfg.eps_smooth);
  return to_mpc_solution(prob, gs, w, solve_cone_program(cond.program, cfg));
}

ClosedLoopRecord receding_horizon(const MpcProblem& prob, const GalerkinSystem& gs, int steps, int replan_horizon,
                                  const StepHook& hook, const SolverConfig& cfg) {
  if (steps < 1 || replan_horizon < 1) throw Error(ErrorCode::kInvalidArgument, "steps and horizon must be >= 1");
  ClosedLoopRecord rec;
  rec.inputs = Eigen::MatrixXd::Zero(steps, gs.n_u);
  rec.states.push_back(prob.x_init);
  MpcProblem local = prob;
  local.T = replan_horizon;
  Eigen::VectorXd warm;
  for (int step = 0; step < steps; ++step) {
    local.x_init = rec.states.back();
    std::vector<CoeffVector> w;
    if (hook) hook(step, local, w);
    const Condensed cond = condense(local, gs, w, cfg.eps_smooth);
    const ConeSolution cs = solve_cone_program(cond.program, cfg, warm.size() ? &warm : nullptr);
    if (cs.status == SolveStatus::kInfeasible) {
      throw Error(ErrorCode::kInfeasible, "receding-horizon step " + std::to_string(step) +
                                              " infeasible (max violation " + std::to_string(cs.stats.max_violation) +
                                              ")");
    }
    MpcSolution sol = to_mpc_solution(local, gs, w, cs);
    rec.inputs.row(step) = sol.u_star.row(0);
    rec.states.push_back(sol.x_traj[1]);
    // Shifted warm start for the next step.
    warm = cs.z;
    const int nu = gs.n_u;
    if (replan_horizon > 1) {
      warm.head((replan_horizon - 1) * nu) = cs.z.tail((replan_horizon - 1) * nu);
    }
    rec.solutions.push_back(std::move(sol));
  }
  return rec;
}

}  // namespace sgmpc
