#include "sgmpc/quadgen.hpp"

#include "sgmpc/error.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace sgmpc {

namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return buf;
}

// Converged once the residual is this far below the exactness tolerance.
constexpr double kTargetFraction = 1e-3;
constexpr double kStallRelImprovement = 1e-6;
constexpr int kMaxDampingTries = 12;
constexpr double kPolishWeight = 1e-2;
constexpr int kPolishMaxIters = 200;
// Polish stops once a window of iterations improves the residual by less than this fraction.
constexpr int kPolishWindow = 10;
constexpr double kPolishMinGain = 1e-2;

int count_negative(const Eigen::VectorXd& w) { return static_cast<int>((w.array() < 0.0).count()); }

Eigen::VectorXd unit_target(int rows) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(rows);
  e(0) = 1.0;
  return e;
}

// Least-squares weights closest to `w`: w + argmin ||Phi dw + r||, minimum-norm dw.
Eigen::VectorXd solve_weights(const Eigen::MatrixXd& phi, const Eigen::VectorXd& w, const Eigen::VectorXd& r,
                              double threshold) {
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(phi);
  cod.setThreshold(threshold);
  return w - cod.solve(r);
}

// Node Jacobian of Phi(nodes) w restricted to `rows` basis functions: column (l, i) = w_l dPsi/dxi_i (xi_l).
Eigen::MatrixXd node_jacobian(const OrthonormalBasis& basis, const Eigen::MatrixXd& nodes, const Eigen::VectorXd& w,
                              int rows) {
  const int d = static_cast<int>(nodes.cols());
  Eigen::MatrixXd jac(rows, nodes.rows() * d);
  for (Eigen::Index l = 0; l < nodes.rows(); ++l) {
    const Eigen::MatrixXd g = basis.gradient(nodes.row(l).transpose());
    jac.middleCols(l * d, d) = w(l) * g.topRows(rows);
  }
  return jac;
}

Eigen::MatrixXd shifted_nodes(const Eigen::MatrixXd& nodes, const Eigen::VectorXd& step) {
  Eigen::MatrixXd out = nodes;
  const Eigen::Index d = nodes.cols();
  for (Eigen::Index l = 0; l < nodes.rows(); ++l) out.row(l) += step.segment(l * d, d).transpose();
  return out;
}

Eigen::VectorXd damped_step(const Eigen::MatrixXd& jtj, const Eigen::VectorXd& grad, double lambda) {
  Eigen::VectorXd diag = jtj.diagonal();
  const double floor = 1e-12 * std::max(1.0, diag.maxCoeff());
  diag = diag.cwiseMax(floor);
  Eigen::MatrixXd a = jtj;
  a.diagonal() += lambda * diag;
  return a.ldlt().solve(-grad);
}

// Joint Levenberg-Marquardt on nodes and weights for the stacked residual
// [Phi_2p w - e_1 ; eps * Phi_extra w], where Phi_extra holds the degree-(2p+1)
// functions. Selects, among exact rules, one that also nearly integrates the
// next degree.
QuadratureRule polish_rule(const QuadratureRule& rule, const OrthonormalBasis& extended, int primary_rows) {
  const int total = extended.size();
  const int m = rule.size();
  const int d = rule.dim();
  Eigen::MatrixXd nodes = rule.nodes;
  Eigen::VectorXd w = rule.weights;

  Eigen::VectorXd scale = Eigen::VectorXd::Ones(total);
  scale.tail(total - primary_rows).setConstant(kPolishWeight);
  const Eigen::VectorXd target = unit_target(total);

  auto residual = [&](const Eigen::MatrixXd& xs, const Eigen::VectorXd& ws) -> Eigen::VectorXd {
    return scale.asDiagonal() * (basis_matrix(extended, xs, total) * ws - target);
  };

  Eigen::VectorXd r = residual(nodes, w);
  double res = r.norm();
  double lambda = 1e-3;
  double window_start = res;
  for (int it = 0; it < kPolishMaxIters && res > 1e-15; ++it) {
    if (it > 0 && it % kPolishWindow == 0) {
      if (res > (1.0 - kPolishMinGain) * window_start) break;
      window_start = res;
    }
    Eigen::MatrixXd jac(total, m * d + m);
    jac.leftCols(m * d) = node_jacobian(extended, nodes, w, total);
    jac.rightCols(m) = basis_matrix(extended, nodes, total);
    jac = scale.asDiagonal() * jac;
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd grad = jac.transpose() * r;
    bool accepted = false;
    for (int t = 0; t < kMaxDampingTries; ++t) {
      const Eigen::VectorXd step = damped_step(jtj, grad, lambda);
      const Eigen::MatrixXd nodes_try = shifted_nodes(nodes, step.head(m * d));
      const Eigen::VectorXd w_try = w + step.tail(m);
      const Eigen::VectorXd r_try = residual(nodes_try, w_try);
      const double res_try = r_try.norm();
      if (std::isfinite(res_try) && res_try < res) {
        accepted = res - res_try > 1e-12 * res;
        nodes = nodes_try;
        w = w_try;
        r = r_try;
        res = res_try;
        lambda = std::max(lambda / 3.0, 1e-15);
        break;
      }
      lambda *= 4.0;
    }
    if (!accepted) break;
  }
  QuadratureRule out = rule;
  out.nodes = nodes;
  out.weights = w;
  return out;
}

}  // namespace

Eigen::MatrixXd basis_matrix(const OrthonormalBasis& basis, const Eigen::MatrixXd& nodes, int rows) {
  if (nodes.cols() != basis.dim()) throw Error(ErrorCode::kDimensionMismatch, "quadrature node dimension");
  const int n = basis.size();
  Eigen::MatrixXd phi(rows, nodes.rows());
  Eigen::VectorXd x(basis.dim());
  Eigen::VectorXd scratch(n);
  for (Eigen::Index l = 0; l < nodes.rows(); ++l) {
    x = nodes.row(l).transpose();
    basis.evaluate_into({x.data(), static_cast<std::size_t>(x.size())}, rows,
                        {scratch.data(), static_cast<std::size_t>(n)},
                        {phi.col(l).data(), static_cast<std::size_t>(rows)});
  }
  return phi;
}

double exactness_residual(const OrthonormalBasis& basis, const Eigen::MatrixXd& nodes, const Eigen::VectorXd& weights) {
  if (weights.size() != nodes.rows()) throw Error(ErrorCode::kDimensionMismatch, "node/weight count");
  return (basis_matrix(basis, nodes, basis.size()) * weights - unit_target(basis.size())).norm();
}

QuadratureRule initial_rule(const OrthonormalBasis& basis2p, const GaussianMixture& gm, int m, std::uint64_t seed) {
  if (m < 1) throw Error(ErrorCode::kInvalidArgument, "initial rule needs m >= 1");
  if (gm.dim() != basis2p.dim()) throw Error(ErrorCode::kDimensionMismatch, "mixture/basis dimension");
  QuadratureRule rule;
  rule.nodes = sample(gm, static_cast<std::size_t>(m), seed).points;
  rule.weights = Eigen::VectorXd::Constant(m, 1.0 / m);
  rule.residual = exactness_residual(basis2p, rule.nodes, rule.weights);
  rule.basis_id = basis2p.fingerprint();
  rule.p = basis2p.degree() / 2;
  rule.negative_weights = 0;
  return rule;
}

RefineReport bcd_refine_report(const QuadratureRule& rule, const OrthonormalBasis& basis2p, const QuadConfig& cfg) {
  if (rule.dim() != basis2p.dim()) throw Error(ErrorCode::kDimensionMismatch, "rule/basis dimension");
  if (!(cfg.exactness_tol > 0.0)) throw Error(ErrorCode::kInvalidArgument, "exactness tolerance must be positive");
  const int n = basis2p.size();
  const Eigen::VectorXd e1 = unit_target(n);
  const double target = kTargetFraction * cfg.exactness_tol;

  Eigen::MatrixXd nodes = rule.nodes;
  Eigen::VectorXd w = rule.weights;
  Eigen::MatrixXd phi = basis_matrix(basis2p, nodes, n);
  Eigen::VectorXd r = phi * w - e1;
  double res = r.norm();

  RefineReport report;
  report.residual_history.push_back(res);
  double lambda = 1e-3;
  int stall = 0;
  int it = 0;
  for (; it < cfg.bcd_max_iters && res > target; ++it) {
    const double previous = res;

    // Weight block: linear least squares with nodes fixed.
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(phi);
    cod.setThreshold(cfg.inner_ls_tol);
    {
      const Eigen::VectorXd w_try = w - cod.solve(r);
      const Eigen::VectorXd r_try = phi * w_try - e1;
      if (r_try.norm() < res) {
        w = w_try;
        r = r_try;
        res = r.norm();
      }
    }
    if (res <= target) {
      report.residual_history.push_back(res);
      break;
    }

    // Node block: damped Gauss-Newton with weights held fixed in the Jacobian.
    // The Jacobian is projected onto the complement of range(Phi), which
    // accounts for the weight re-solve that follows every node move.
    {
      Eigen::MatrixXd jac = node_jacobian(basis2p, nodes, w, n);
      jac -= phi * cod.solve(jac);
      const Eigen::MatrixXd jtj = jac.transpose() * jac;
      const Eigen::VectorXd grad = jac.transpose() * r;
      for (int t = 0; t < kMaxDampingTries; ++t) {
        const Eigen::MatrixXd nodes_try = shifted_nodes(nodes, damped_step(jtj, grad, lambda));
        const Eigen::MatrixXd phi_try = basis_matrix(basis2p, nodes_try, n);
        const Eigen::VectorXd w_try = solve_weights(phi_try, w, phi_try * w - e1, cfg.inner_ls_tol);
        const Eigen::VectorXd r_try = phi_try * w_try - e1;
        const double res_try = r_try.norm();
        if (std::isfinite(res_try) && res_try < res) {
          nodes = nodes_try;
          phi = phi_try;
          w = w_try;
          r = r_try;
          res = res_try;
          lambda = std::max(lambda / 3.0, 1e-15);
          break;
        }
        lambda *= 4.0;
      }
    }
    report.residual_history.push_back(res);

    if (res > cfg.exactness_tol && previous - res <= kStallRelImprovement * previous) {
      if (++stall >= cfg.stall_window) {
        report.stalled = true;
        ++it;
        break;
      }
    } else {
      stall = 0;
    }
  }

  report.iterations = it;
  report.rule = rule;
  report.rule.nodes = nodes;
  report.rule.weights = w;
  report.rule.residual = res;
  report.rule.basis_id = basis2p.fingerprint();
  report.rule.p = basis2p.degree() / 2;
  report.rule.negative_weights = count_negative(w);
  return report;
}

QuadratureRule bcd_refine(const QuadratureRule& rule, const OrthonormalBasis& basis2p, const QuadConfig& cfg) {
  RefineReport report = bcd_refine_report(rule, basis2p, cfg);
  if (report.stalled) {
    throw Error(ErrorCode::kStalled, "quadrature refinement stalled at residual " + sci(report.rule.residual));
  }
  return std::move(report.rule);
}

QuadratureRule cluster_reduce(const QuadratureRule& rule) {
  const int m = rule.size();
  if (m < 2) throw Error(ErrorCode::kTooFewNodes, "cannot merge a single-node rule");
  int best_a = 0;
  int best_b = 1;
  double best = std::numeric_limits<double>::infinity();
  for (int a = 0; a < m; ++a) {
    for (int b = a + 1; b < m; ++b) {
      const double dist = (rule.nodes.row(a) - rule.nodes.row(b)).norm() *
                          std::min(std::abs(rule.weights(a)), std::abs(rule.weights(b)));
      if (dist < best) {
        best = dist;
        best_a = a;
        best_b = b;
      }
    }
  }

  const double wa = rule.weights(best_a);
  const double wb = rule.weights(best_b);
  const double abs_sum = std::abs(wa) + std::abs(wb);
  Eigen::RowVectorXd merged = rule.nodes.row(best_a);
  if (abs_sum > 0.0) {
    merged = (std::abs(wa) * rule.nodes.row(best_a) + std::abs(wb) * rule.nodes.row(best_b)) / abs_sum;
  }

  QuadratureRule out = rule;
  out.nodes.resize(m - 1, rule.dim());
  out.weights.resize(m - 1);
  for (int l = 0, o = 0; l < m; ++l) {
    if (l == best_b) continue;
    out.nodes.row(o) = (l == best_a) ? merged : Eigen::RowVectorXd(rule.nodes.row(l));
    out.weights(o) = (l == best_a) ? wa + wb : rule.weights(l);
    ++o;
  }
  out.negative_weights = count_negative(out.weights);
  out.residual = std::numeric_limits<double>::quiet_NaN();  // unrefined
  return out;
}

QuadratureRule generate(const GaussianMixture& gm, const OrthonormalBasis& basis2p, const QuadConfig& cfg) {
  if (basis2p.degree() % 2 != 0) throw Error(ErrorCode::kInvalidArgument, "quadrature basis degree must be even (2p)");
  const int n = basis2p.size();
  const int m0 = cfg.m_init > 0 ? cfg.m_init : 3 * n;
  auto exact = [&](const RefineReport& r) { return !r.stalled && r.rule.residual <= cfg.exactness_tol; };

  RefineReport first = bcd_refine_report(initial_rule(basis2p, gm, m0, cfg.seed), basis2p, cfg);
  if (!exact(first)) {
    first = bcd_refine_report(initial_rule(basis2p, gm, 2 * m0, cfg.seed), basis2p, cfg);
    if (!exact(first)) {
      throw Error(ErrorCode::kNoExactRuleFound,
                  "initial rule of " + std::to_string(2 * m0) + " nodes reached residual " +
                      sci(first.rule.residual));
    }
  }

  QuadratureRule best = std::move(first.rule);
  while (cfg.reduction_enabled && best.size() > 1) {
    RefineReport next = bcd_refine_report(cluster_reduce(best), basis2p, cfg);
    if (!exact(next)) break;
    best = std::move(next.rule);
  }

  // Degrees of freedom beyond the exactness conditions: prefer the member of
  // the solution family that also (nearly) integrates degree 2p+1.
  if (cfg.polish && best.size() * (best.dim() + 1) > n) {
    try {
      const MixtureMoments moments(gm, 2 * (basis2p.degree() + 1));
      const OrthonormalBasis extended = gram_schmidt(moments, gm.dim(), basis2p.degree() + 1);
      RefineReport cleaned = bcd_refine_report(polish_rule(best, extended, n), basis2p, cfg);
      if (exact(cleaned)) best = std::move(cleaned.rule);
    } catch (const Error&) {
      // Extended basis not constructible to tolerance; keep the unpolished rule.
    }
  }
  return best;
}

}  // namespace sgmpc
