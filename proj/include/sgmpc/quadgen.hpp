#pragma once

#include "sgmpc/polybasis.hpp"
#include "sgmpc/uncertainty.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>

namespace sgmpc {

/// Nodes and weights integrating the order-2p basis exactly.
struct QuadratureRule {
  Eigen::MatrixXd nodes;     // M x d
  Eigen::VectorXd weights;   // M
  double residual = 0.0;     // || Phi(nodes) w - e_1 ||_2 against the fitted basis
  std::string basis_id;      // fingerprint of the order-2p basis
  int p = 0;                 // model order; the rule targets degree 2p
  int negative_weights = 0;  // count of w_l < 0

  [[nodiscard]] int size() const { return static_cast<int>(weights.size()); }
  [[nodiscard]] int dim() const { return static_cast<int>(nodes.cols()); }
};

struct QuadConfig {
  int m_init = 0;  // 0 selects 3 * N_2p
  double exactness_tol = 1e-8;
  int bcd_max_iters = 500;
  double inner_ls_tol = 1e-12;  // rank threshold of the weight least-squares block
  bool reduction_enabled = true;
  /// After reduction, spend leftover degrees of freedom on the next degree up.
  bool polish = true;
  std::uint64_t seed = 0;
  int stall_window = 20;
};

/// Outcome of one refinement run, for callers that handle failure themselves.
struct RefineReport {
  QuadratureRule rule;
  bool stalled = false;
  int iterations = 0;
  std::vector<double> residual_history;
};

/// Phi(nodes) with [Phi]_{k,l} = Psi_k(xi_l), restricted to the first `rows` basis functions.
Eigen::MatrixXd basis_matrix(const OrthonormalBasis& basis, const Eigen::MatrixXd& nodes, int rows);

/// || Phi(nodes) w - e_1 ||_2 over all functions of the basis.
double exactness_residual(const OrthonormalBasis& basis, const Eigen::MatrixXd& nodes, const Eigen::VectorXd& weights);

/// m i.i.d. draws from the mixture with uniform weights 1/m.
QuadratureRule initial_rule(const OrthonormalBasis& basis2p, const GaussianMixture& gm, int m, std::uint64_t seed);

/// Block coordinate descent on min || Phi(nodes) w - e_1 ||: a linear least-squares
/// weight block alternating with a Levenberg-Marquardt node block. Each accepted
/// step strictly lowers the residual.
RefineReport bcd_refine_report(const QuadratureRule& rule, const OrthonormalBasis& basis2p, const QuadConfig& cfg);

/// As bcd_refine_report(), but throws Stalled when progress stops above tolerance.
QuadratureRule bcd_refine(const QuadratureRule& rule, const OrthonormalBasis& basis2p, const QuadConfig& cfg);

/// Merges the pair minimizing ||xi_a - xi_b|| * min(|w_a|, |w_b|) into one node.
QuadratureRule cluster_reduce(const QuadratureRule& rule);

/// Refine, then shrink by clustering until refinement fails; returns the smallest exact rule.
QuadratureRule generate(const GaussianMixture& gm, const OrthonormalBasis& basis2p, const QuadConfig& cfg);

}  // namespace sgmpc
