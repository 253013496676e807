#include "sgmpc/bench.hpp"

#include "sgmpc/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

namespace sgmpc {

namespace {

constexpr int kMaxTaylorTerms = 40;
constexpr double kScaledNorm = 0.5;

/// gamma + alpha * C_f + beta * C_r with C_f = c0 (1 + s xi_1), C_r = c0 (1 + s xi_2).
Polynomial stiffness_affine(double gamma, double alpha, double beta, double c0, double s) {
  Polynomial p = Polynomial::constant(2, gamma + (alpha + beta) * c0);
  p.add_term(MultiIndex::unit(2, 0), alpha * c0 * s);
  p.add_term(MultiIndex::unit(2, 1), beta * c0 * s);
  return p;
}

GaussianMixture standardized_pair(int dim, double offset, double corr) {
  // Component means at +/- offset with variance 1 - offset^2 per axis, so every marginal has unit variance.
  Eigen::MatrixXd corr_m = Eigen::MatrixXd::Constant(dim, dim, corr);
  corr_m.diagonal().setOnes();
  const double v = 1.0 - offset * offset;
  return GaussianMixture({{0.5, Eigen::VectorXd::Constant(dim, -offset), v * corr_m},
                          {0.5, Eigen::VectorXd::Constant(dim, offset), v * corr_m}});
}

/// Streaming mean / variance / violation counts over samples.
class Accumulator {
 public:
  Accumulator(int horizon, int n_x, const std::vector<AffineConstraint>& constraints)
      : horizon_(horizon),
        constraints_(constraints),
        sum_(Eigen::MatrixXd::Zero(horizon + 1, n_x)),
        sum2_(Eigen::MatrixXd::Zero(horizon + 1, n_x)),
        shift_(Eigen::MatrixXd::Zero(horizon + 1, n_x)),
        violations_(constraints.size(), std::vector<long>(static_cast<std::size_t>(horizon + 1), 0)) {}

  void add(int t, const Eigen::VectorXd& x) {
    if (count_ == 0) shift_.row(t) = x.transpose();
    const Eigen::VectorXd d = x - shift_.row(t).transpose();
    sum_.row(t) += d.transpose();
    sum2_.row(t) += d.cwiseProduct(d).transpose();
    for (std::size_t c = 0; c < constraints_.size(); ++c) {
      if (constraints_[c].a.dot(x) + constraints_[c].b > 0.0) ++violations_[c][static_cast<std::size_t>(t)];
    }
    if (t == horizon_) ++count_;
  }

  McReport report() const {
    McReport r;
    r.n_samples = static_cast<int>(count_);
    const double n = static_cast<double>(count_);
    r.mean = sum_ / n;
    Eigen::MatrixXd var = (sum2_ - sum_.cwiseProduct(sum_) / n) / std::max(1.0, n - 1.0);
    r.std = var.cwiseMax(0.0).cwiseSqrt();
    r.mean += shift_;
    for (std::size_t c = 0; c < constraints_.size(); ++c) {
      const auto& con = constraints_[c];
      double worst = 0.0;
      for (int t = 1; t <= horizon_; ++t) {
        const bool active = con.active_times.empty() ||
                            std::find(con.active_times.begin(), con.active_times.end(), t) != con.active_times.end();
        if (active) worst = std::max(worst, static_cast<double>(violations_[c][static_cast<std::size_t>(t)]) / n);
      }
      r.violation_rate.push_back(worst);
      r.constraint_names.push_back(con.name);
    }
    return r;
  }

 private:
  int horizon_;
  const std::vector<AffineConstraint>& constraints_;
  Eigen::MatrixXd sum_;
  Eigen::MatrixXd sum2_;
  Eigen::MatrixXd shift_;  // first sample per step
  std::vector<std::vector<long>> violations_;
  long count_ = 0;
};

}  // namespace

Eigen::MatrixXd expm(const Eigen::MatrixXd& m, double tol) {
  if (m.rows() != m.cols()) throw Error(ErrorCode::kDimensionMismatch, "expm needs a square matrix");
  if (!m.allFinite()) throw Error(ErrorCode::kNonConvergentSeries, "matrix exponential of a non-finite matrix");
  const Eigen::Index n = m.rows();
  const double norm1 = m.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > kScaledNorm) squarings = static_cast<int>(std::ceil(std::log2(norm1 / kScaledNorm)));
  const Eigen::MatrixXd x = m / std::ldexp(1.0, squarings);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
  bool converged = false;
  for (int k = 1; k <= kMaxTaylorTerms; ++k) {
    term = term * x / static_cast<double>(k);
    sum += term;
    if (term.cwiseAbs().maxCoeff() <= tol * sum.cwiseAbs().maxCoeff()) {
      converged = true;
      break;
    }
  }
  if (!converged) throw Error(ErrorCode::kNonConvergentSeries, "matrix exponential series did not converge");
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  return sum;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> discretize(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double dt,
                                                       DiscretizationMethod method) {
  if (!(dt > 0.0)) throw Error(ErrorCode::kInvalidArgument, "dt must be positive");
  if (A.rows() != A.cols() || B.rows() != A.rows()) throw Error(ErrorCode::kDimensionMismatch, "discretize shapes");
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  if (method == DiscretizationMethod::kEuler) {
    return {Eigen::MatrixXd::Identity(n, n) + dt * A, dt * B};
  }
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = A * dt;
  aug.topRightCorner(n, m) = B * dt;
  const Eigen::MatrixXd e = expm(aug);
  return {e.topLeftCorner(n, n), e.topRightCorner(n, m)};
}

StochasticLTI discretize_euler(const StochasticLTI& sys, double dt) {
  sys.validate();
  StochasticLTI out = sys;
  const int d = sys.dim();
  for (int r = 0; r < sys.n_x(); ++r) {
    for (int c = 0; c < sys.n_x(); ++c) {
      out.A(r, c) = sys.A(r, c) * dt + (r == c ? Polynomial::constant(d, 1.0) : Polynomial(d));
    }
    for (int c = 0; c < sys.n_u(); ++c) out.B(r, c) = sys.B(r, c) * dt;
    for (int c = 0; c < sys.n_w(); ++c) out.D(r, c) = sys.D(r, c) * dt;
  }
  return out;
}

DiscreteModel Scenario::model_at(const Eigen::VectorXd& xi) const {
  DiscreteModel dm{system.A.evaluate(xi), system.B.evaluate(xi),
                   system.n_w() > 0 ? system.D.evaluate(xi) : Eigen::MatrixXd(system.n_x(), 0)};
  if (!discretization) return dm;
  const int nu = system.n_u();
  Eigen::MatrixXd bd(dm.B.rows(), nu + dm.D.cols());
  bd << dm.B, dm.D;
  auto [ad, bdd] = discretize(dm.A, bd, discretization->dt, discretization->method);
  return {ad, bdd.leftCols(nu), bdd.rightCols(bdd.cols() - nu)};
}

void Scenario::apply_reference(MpcProblem& prob, int start) const {
  if (!prob.tracking || !reference) return;
  prob.tracking->y_ref.clear();
  for (int t = 1; t <= prob.T; ++t) prob.tracking->y_ref.push_back(reference(start + t));
}

void Scenario::validate() const {
  system.validate();
  if (system.dim() != mixture.dim()) throw Error(ErrorCode::kDimensionMismatch, "system/mixture parameter dimension");
  if (x0.size() != system.n_x()) throw Error(ErrorCode::kDimensionMismatch, "initial state length");
  if (mode == RunMode::kReceding && closed_loop_steps < 1) {
    throw Error(ErrorCode::kInvalidArgument, "receding mode needs closed_loop_steps >= 1");
  }
  if (disturbance && system.n_w() == 0) throw Error(ErrorCode::kDimensionMismatch, "disturbance given but D is empty");
}

GaussianMixture default_mixture() {
  Eigen::MatrixXd c1(2, 2), c2(2, 2);
  c1 << 1.0, 0.4, 0.4, 1.0;
  c2 << 0.8, -0.3, -0.3, 0.8;
  return GaussianMixture({{0.5, Eigen::Vector2d(-0.5, -0.5), 0.5 * c1}, {0.5, Eigen::Vector2d(0.75, 0.75), 0.5 * c2}});
}

Scenario scenario_obstacle(const ObstacleParams& params) {
  const double rho1 = params.deterministic ? 0.0 : params.rho1;
  const double rho2 = params.deterministic ? 0.0 : params.rho2;
  Scenario sc;
  sc.name = params.deterministic ? "obstacle-deterministic" : "obstacle";
  sc.mixture = params.mixture.value_or(default_mixture());
  const int d = sc.mixture.dim();
  if (d != 2) throw Error(ErrorCode::kDimensionMismatch, "obstacle scenario needs a 2-D mixture");

  StochasticLTI& sys = sc.system;
  sys.A = PolyMatrix(2, 2, d);
  sys.A(0, 0) = Polynomial::constant(d, 0.9) + Polynomial::linear(d, 0, rho1);
  sys.A(0, 1) = Polynomial::constant(d, 0.1);
  sys.A(1, 0) = Polynomial::constant(d, 0.1);
  sys.A(1, 1) = Polynomial::constant(d, 0.85);
  sys.B = PolyMatrix(2, 1, d);
  sys.B(0, 0) = Polynomial::constant(d, 0.25) + Polynomial::linear(d, 0, -rho1);
  sys.B(1, 0) = Polynomial::constant(d, 0.75) + Polynomial::linear(d, 1, rho2);
  sys.D = PolyMatrix(2, 0, d);

  sc.x0 = Eigen::Vector2d(20.0, 10.0);
  MpcProblem& prob = sc.problem;
  prob.T = params.horizon;
  prob.Q = Eigen::Vector2d(100.0, 100.0).asDiagonal();
  prob.R = Eigen::MatrixXd::Identity(1, 1);
  prob.u_lower = Eigen::VectorXd::Constant(1, -params.u_max);
  prob.u_upper = Eigen::VectorXd::Constant(1, params.u_max);
  AffineConstraint g;
  g.a = Eigen::Vector2d(-1.0, -1.0);
  g.b = params.offset;
  g.beta = params.beta;
  g.name = "half_space";
  prob.constraints.push_back(g);
  sc.state_names = {"x1", "x2"};
  sc.validate();
  return sc;
}

Scenario scenario_vehicle(const VehicleParams& p) {
  Scenario sc;
  sc.name = "vehicle";
  sc.mixture = p.mixture.value_or(standardized_pair(2, 0.6, 0.5));
  if (sc.mixture.dim() != 2) throw Error(ErrorCode::kDimensionMismatch, "vehicle scenario needs a 2-D mixture");
  const double c0 = p.stiffness_per_deg * 180.0 / std::numbers::pi;
  const double s = p.spread;
  const double m = p.mass;
  const double vx = p.vx;
  const double a = p.a;
  const double b = p.b;
  const double iz = p.izz;
  auto lin = [&](double gamma, double alpha, double beta) { return stiffness_affine(gamma, alpha, beta, c0, s); };

  StochasticLTI& sys = sc.system;
  sys.A = PolyMatrix(4, 4, 2);
  sys.A(0, 1) = Polynomial::constant(2, 1.0);
  sys.A(1, 1) = lin(0, -2 / (m * vx), -2 / (m * vx));
  sys.A(1, 2) = lin(0, 2 / m, 2 / m);
  sys.A(1, 3) = lin(0, -2 * a / (m * vx), 2 * b / (m * vx));
  sys.A(2, 3) = Polynomial::constant(2, 1.0);
  sys.A(3, 1) = lin(0, -2 * a / (iz * vx), 2 * b / (iz * vx));
  sys.A(3, 2) = lin(0, 2 * a / iz, -2 * b / iz);
  sys.A(3, 3) = lin(0, -2 * a * a / (iz * vx), -2 * b * b / (iz * vx));
  sys.B = PolyMatrix(4, 1, 2);
  sys.B(1, 0) = lin(0, 2 / m, 0);
  sys.B(3, 0) = lin(0, 2 * a / iz, 0);
  // Desired yaw rate enters as a known input channel.
  sys.D = PolyMatrix(4, 1, 2);
  sys.D(1, 0) = lin(-vx, -2 * a / (m * vx), 2 * b / (m * vx));
  sys.D(3, 0) = lin(0, -2 * a * a / (iz * vx), -2 * b * b / (iz * vx));
  sc.discretization = Discretization{p.method, p.dt};

  sc.x0 = Eigen::Vector4d(p.e1_0, 0.0, 0.0, 0.0);
  MpcProblem& prob = sc.problem;
  prob.T = p.horizon;
  prob.Q = Eigen::Vector4d(7000.0, 1.0, 20000.0, 1.0).asDiagonal();
  prob.R = Eigen::MatrixXd::Identity(1, 1);
  prob.u_lower = Eigen::VectorXd::Constant(1, -p.delta_max);
  prob.u_upper = Eigen::VectorXd::Constant(1, p.delta_max);
  Tracking tr;
  tr.C = Eigen::RowVector4d(1.0, 0.0, 0.0, 0.0);
  tr.S = Eigen::MatrixXd::Constant(1, 1, 100.0);
  tr.y_ref = {Eigen::VectorXd::Zero(1)};
  prob.tracking = tr;
  const double deg = std::numbers::pi / 180.0;
  for (auto& c : box_constraints(4, 0, -1.0, 1.0, p.beta, "e1")) prob.constraints.push_back(c);
  for (auto& c : box_constraints(4, 1, -10.0, 10.0, p.beta, "e1_dot")) prob.constraints.push_back(c);
  for (auto& c : box_constraints(4, 2, -28.65 * deg, 28.65 * deg, p.beta, "e2")) prob.constraints.push_back(c);
  for (auto& c : box_constraints(4, 3, -572.96 * deg, 572.96 * deg, p.beta, "e2_dot")) prob.constraints.push_back(c);
  sc.reference = [](int) { return Eigen::VectorXd::Zero(1); };
  sc.mode = RunMode::kReceding;
  sc.closed_loop_steps = p.steps;
  sc.state_names = {"e1", "e1_dot", "e2", "e2_dot"};
  sc.validate();
  return sc;
}

Eigen::VectorXd quadrotor_rhs(const QuadrotorPhysical& q, const Eigen::VectorXd& x, const Eigen::Vector4d& omega) {
  if (x.size() != 12) throw Error(ErrorCode::kDimensionMismatch, "quadrotor state must have 12 entries");
  const Eigen::Vector4d sq = omega.cwiseProduct(omega);
  const double b = q.thrust();
  const double u1 = b * sq.sum();
  const double u2 = b * (sq(3) - sq(1));
  const double u3 = b * (sq(2) - sq(0));
  const double u4 = q.drag * (-sq(0) + sq(1) - sq(2) + sq(3));
  const double phi = x(6), theta = x(8), psi = x(10);
  const double dphi = x(7), dtheta = x(9), dpsi = x(11);
  Eigen::VectorXd f(12);
  f(0) = x(1);
  f(1) = (std::cos(phi) * std::sin(theta) * std::cos(psi) + std::sin(phi) * std::sin(psi)) * u1 / q.mass;
  f(2) = x(3);
  f(3) = (std::cos(phi) * std::sin(theta) * std::sin(psi) - std::sin(phi) * std::cos(psi)) * u1 / q.mass;
  f(4) = x(5);
  f(5) = std::cos(phi) * std::cos(theta) * u1 / q.mass - q.gravity;
  f(6) = dphi;
  f(7) = dtheta * dpsi * (q.iyy - q.izz) / q.ixx + q.arm * u2 / q.ixx;
  f(8) = dtheta;
  f(9) = dphi * dpsi * (q.izz - q.ixx) / q.iyy + q.arm * u3 / q.iyy;
  f(10) = dpsi;
  f(11) = dphi * dtheta * (q.ixx - q.iyy) / q.izz + u4 / q.izz;
  return f;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> quadrotor_linearization(const QuadrotorPhysical& q) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(12, 12);
  for (int i = 0; i < 12; i += 2) a(i, i + 1) = 1.0;
  a(1, 8) = q.gravity;
  a(3, 6) = -q.gravity;
  const double k = 2.0 * q.thrust() * q.hover_speed;  // dU/d omega_i at hover
  const double kd = 2.0 * q.drag * q.hover_speed;
  Eigen::MatrixXd bm = Eigen::MatrixXd::Zero(12, 4);
  bm.row(5).setConstant(k / q.mass);
  bm(7, 1) = -q.arm * k / q.ixx;
  bm(7, 3) = q.arm * k / q.ixx;
  bm(9, 0) = -q.arm * k / q.iyy;
  bm(9, 2) = q.arm * k / q.iyy;
  bm.row(11) << -kd / q.izz, kd / q.izz, -kd / q.izz, kd / q.izz;
  return {a, bm};
}

Eigen::Vector3d helix_reference(double t) { return {2.0 * std::cos(0.2 * t), 2.0 * std::sin(0.2 * t), 0.2 * t}; }

Scenario scenario_quadrotor(const QuadrotorParams& p) {
  if (!p.A_c || !p.B_c) throw Error(ErrorCode::kMissingModelConfig, "quadrotor scenario needs model.A_c and model.B_c");
  if (p.A_c->rows() != 12 || p.A_c->cols() != 12 || p.B_c->rows() != 12 || p.B_c->cols() != 4) {
    throw Error(ErrorCode::kDimensionMismatch, "quadrotor model must be 12x12 (A_c) and 12x4 (B_c)");
  }
  Scenario sc;
  sc.name = "quadrotor-" + p.reference;
  sc.mixture = p.mixture.value_or(standardized_pair(3, 0.6, 0.3));
  const int d = sc.mixture.dim();
  if (d != 3) throw Error(ErrorCode::kDimensionMismatch, "quadrotor scenario needs a 3-D mixture");

  const auto [ad, bd] = discretize(*p.A_c, *p.B_c, p.dt, DiscretizationMethod::kZeroOrderHold);
  Eigen::MatrixXd dd = Eigen::MatrixXd::Zero(12, 3);
  if (p.D) {
    dd = *p.D;
  } else {
    dd(0, 0) = dd(2, 1) = dd(4, 2) = 1.0;
  }
  if (dd.rows() != 12 || dd.cols() != 3) throw Error(ErrorCode::kDimensionMismatch, "quadrotor D must be 12x3");
  sc.system.A = PolyMatrix::constant(ad, d);
  sc.system.B = PolyMatrix::constant(bd, d);
  sc.system.D = PolyMatrix::constant(dd, d);
  const double sigma = p.sigma;
  sc.disturbance = [sigma](const Eigen::VectorXd& xi) -> Eigen::VectorXd { return sigma * xi; };

  sc.x0 = Eigen::VectorXd::Zero(12);
  MpcProblem& prob = sc.problem;
  prob.T = p.horizon;
  prob.Q = p.q_weight * Eigen::MatrixXd::Identity(12, 12);
  prob.R = p.r_weight * Eigen::MatrixXd::Identity(4, 4);
  prob.u_lower = Eigen::VectorXd::Constant(4, -p.du_max);
  prob.u_upper = Eigen::VectorXd::Constant(4, p.du_max);
  Tracking tr;
  tr.C = Eigen::MatrixXd::Zero(3, 12);
  tr.C(0, 0) = tr.C(1, 2) = tr.C(2, 4) = 1.0;
  tr.S = p.s_weight * Eigen::MatrixXd::Identity(3, 3);
  tr.y_ref = {Eigen::VectorXd::Zero(3)};
  prob.tracking = tr;
  for (auto& c : box_constraints(12, 6, -p.attitude_max, p.attitude_max, p.beta, "phi")) prob.constraints.push_back(c);
  for (auto& c : box_constraints(12, 8, -p.attitude_max, p.attitude_max, p.beta, "theta")) prob.constraints.push_back(c);

  const double dt = p.dt;
  if (p.reference == "helix") {
    sc.reference = [dt](int t) -> Eigen::VectorXd { return helix_reference(dt * t); };
  } else if (p.reference == "step") {
    sc.reference = [](int) -> Eigen::VectorXd { return Eigen::Vector3d(10.0, 10.0, 0.0); };
  } else {
    throw Error(ErrorCode::kInvalidArgument, "quadrotor reference must be 'helix' or 'step'");
  }
  sc.mode = RunMode::kReceding;
  sc.closed_loop_steps = p.steps;
  sc.state_names = {"x", "x_dot", "y", "y_dot", "z", "z_dot", "phi", "phi_dot", "theta", "theta_dot", "psi", "psi_dot"};
  sc.validate();
  return sc;
}

McReport mc_propagate(const Scenario& sc, const Eigen::MatrixXd& u, int n, const McOptions& opts) {
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "Monte Carlo needs at least 2 samples");
  if (u.cols() != sc.n_u()) throw Error(ErrorCode::kDimensionMismatch, "input sequence width");
  const auto start = std::chrono::steady_clock::now();
  const int T = static_cast<int>(u.rows());
  const SampleBatch batch = sample(sc.mixture, static_cast<std::size_t>(n), opts.seed);
  Accumulator acc(T, sc.n_x(), sc.problem.constraints);
  std::optional<Eigen::MatrixXd> snap;
  if (opts.snapshot_step >= 0 && opts.snapshot_step <= T) snap = Eigen::MatrixXd(n, sc.n_x());
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd xi = batch.points.row(i).transpose();
    const DiscreteModel dm = sc.model_at(xi);
    Eigen::VectorXd w;
    if (sc.disturbance) w = dm.D * sc.disturbance(xi);
    Eigen::VectorXd x = sc.x0;
    for (int t = 0; t <= T; ++t) {
      acc.add(t, x);
      if (snap && t == opts.snapshot_step) snap->row(i) = x.transpose();
      if (t == T) break;
      Eigen::VectorXd next = dm.A * x + dm.B * u.row(t).transpose();
      if (sc.disturbance) next += w;
      x = std::move(next);
    }
  }
  McReport r = acc.report();
  r.snapshot = std::move(snap);
  r.snapshot_step = opts.snapshot_step;
  r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

McReport mc_statistics(const std::vector<Eigen::MatrixXd>& states, const std::vector<AffineConstraint>& constraints,
                       int horizon) {
  if (static_cast<int>(states.size()) != horizon + 1) throw Error(ErrorCode::kDimensionMismatch, "state sample steps");
  const Eigen::Index n = states.front().rows();
  Accumulator acc(horizon, static_cast<int>(states.front().cols()), constraints);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int t = 0; t <= horizon; ++t) acc.add(t, states[static_cast<std::size_t>(t)].row(i).transpose());
  }
  return acc.report();
}

McMpcResult mc_mpc(const Scenario& sc, int n, std::uint64_t seed, const SolverConfig& cfg) {
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "Monte Carlo MPC needs at least 2 samples");
  const auto start = std::chrono::steady_clock::now();
  MpcProblem prob = sc.problem;
  sc.apply_reference(prob, 0);
  const int T = prob.T;
  const int nx = sc.n_x();
  const int nu = sc.n_u();
  const int m = T * nu;
  prob.x_init = CoeffVector::deterministic(sc.x0, 1);
  prob.validate(nx, nu, 1);

  Eigen::MatrixXd qeff = prob.Q;
  if (prob.tracking) qeff += prob.tracking->C.transpose() * prob.tracking->S * prob.tracking->C;

  struct Slot {
    const AffineConstraint* con;
    int t;
    Eigen::MatrixXd rows;  // n x m
    Eigen::VectorXd offs;  // n
  };
  std::vector<Slot> slots;
  for (const auto& c : prob.constraints) {
    for (int t = 1; t <= T; ++t) {
      const bool active =
          c.active_times.empty() || std::find(c.active_times.begin(), c.active_times.end(), t) != c.active_times.end();
      if (active) slots.push_back({&c, t, Eigen::MatrixXd(n, m), Eigen::VectorXd(n)});
    }
  }

  ConeProgram prog;
  prog.H = Eigen::MatrixXd::Zero(m, m);
  prog.h = Eigen::VectorXd::Zero(m);
  const SampleBatch batch = sample(sc.mixture, static_cast<std::size_t>(n), seed);
  std::vector<Eigen::VectorXd> F(static_cast<std::size_t>(T + 1));
  std::vector<Eigen::MatrixXd> G(static_cast<std::size_t>(T + 1));
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd xi = batch.points.row(i).transpose();
    const DiscreteModel dm = sc.model_at(xi);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(nx);
    if (sc.disturbance) w = dm.D * sc.disturbance(xi);
    F[0] = sc.x0;
    G[0] = Eigen::MatrixXd::Zero(nx, m);
    for (int t = 0; t < T; ++t) {
      const auto k = static_cast<std::size_t>(t);
      F[k + 1] = dm.A * F[k] + w;
      G[k + 1] = dm.A * G[k];
      G[k + 1].middleCols(t * nu, nu) += dm.B;
    }
    for (int t = 1; t <= T; ++t) {
      const auto k = static_cast<std::size_t>(t);
      const Eigen::MatrixXd qg = qeff * G[k];
      prog.H.noalias() += G[k].transpose() * qg;
      prog.h.noalias() += qg.transpose() * F[k];
      prog.c += F[k].dot(qeff * F[k]);
      if (prob.tracking) {
        const auto& tr = *prob.tracking;
        const Eigen::VectorXd csy = tr.C.transpose() * (tr.S * tr.ref(t));
        prog.h.noalias() -= G[k].transpose() * csy;
        prog.c += -2.0 * csy.dot(F[k]) + tr.ref(t).dot(tr.S * tr.ref(t));
      }
    }
    for (auto& s : slots) {
      const auto k = static_cast<std::size_t>(s.t);
      s.rows.row(i) = s.con->a.transpose() * G[k];
      s.offs(i) = s.con->a.dot(F[k]) + s.con->b;
    }
  }
  const double inv_n = 1.0 / n;
  prog.H *= inv_n;
  prog.h *= inv_n;
  prog.c *= inv_n;
  for (int t = 0; t < T; ++t) prog.H.block(t * nu, t * nu, nu, nu) += prob.R;
  prog.H = 0.5 * (prog.H + prog.H.transpose());
  prog.lower = Eigen::VectorXd::Constant(m, -std::numeric_limits<double>::infinity());
  prog.upper = Eigen::VectorXd::Constant(m, std::numeric_limits<double>::infinity());
  if (prob.u_lower.size() == nu) {
    for (int t = 0; t < T; ++t) {
      prog.lower.segment(t * nu, nu) = prob.u_lower;
      prog.upper.segment(t * nu, nu) = prob.u_upper;
    }
  }
  const double scale = 1.0 / std::sqrt(n - 1.0);
  for (auto& s : slots) {
    ConeMargin cm;
    cm.a = s.rows.colwise().mean().transpose();
    cm.b = s.offs.mean();
    cm.P = (s.rows.rowwise() - cm.a.transpose()) * scale;
    cm.p = (s.offs.array() - cm.b).matrix() * scale;
    cm.kappa = kappa(s.con->beta);
    cm.eps = cfg.eps_smooth;
    cm.label = s.con->name + "@" + std::to_string(s.t);
    prog.margins.push_back(std::move(cm));
  }
  const ConeSolution cs = solve_cone_program(prog, cfg);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  McMpcResult out;
  out.solution.u_star = Eigen::MatrixXd(T, nu);
  for (int t = 0; t < T; ++t) out.solution.u_star.row(t) = cs.z.segment(t * nu, nu).transpose();
  out.solution.objective = cs.objective;
  out.solution.margins = cs.margins;
  out.solution.stats = cs.stats;
  out.solution.status = cs.status;
  McOptions opts;
  opts.seed = seed;
  out.report = mc_propagate(sc, out.solution.u_star, n, opts);
  out.report.wall_time_s = wall;
  return out;
}

double compare_pdf(std::vector<double> a, std::vector<double> b, double tie_tol) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::kInvalidArgument, "compare_pdf needs nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v + tie_tol) ++i;
    while (j < b.size() && b[j] <= v + tie_tol) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

}  // namespace sgmpc
