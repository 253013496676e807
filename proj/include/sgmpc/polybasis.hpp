#pragma once

#include "sgmpc/uncertainty.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace sgmpc {

/// All multi-indices with total degree <= p, graded-lexicographically sorted.
///
/// Within a degree class xi_1 has the highest priority, so for d = 2 the order
/// is 1, xi1, xi2, xi1^2, xi1 xi2, xi2^2, ...
class MonomialOrder {
 public:
  MonomialOrder(int dim, int degree);

  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] int degree() const { return degree_; }
  [[nodiscard]] int size() const { return static_cast<int>(indices_.size()); }
  [[nodiscard]] const MultiIndex& operator[](int k) const { return indices_[static_cast<std::size_t>(k)]; }
  [[nodiscard]] const std::vector<MultiIndex>& indices() const { return indices_; }

  /// Position of alpha in the order, or -1.
  [[nodiscard]] int find(const MultiIndex& alpha) const;
  /// Position of alpha_k - e_axis, or -1 if that exponent is zero.
  [[nodiscard]] int lowered(int k, int axis) const {
    return lowered_[static_cast<std::size_t>(k * dim_ + axis)];
  }

  /// Monomial values at x by incremental products: m_k = m_parent * x_axis.
  void monomials(std::span<const double> x, std::span<double> out) const;

 private:
  int dim_;
  int degree_;
  std::vector<MultiIndex> indices_;
  std::vector<int> lowered_;
  std::vector<int> parent_;
  std::vector<int> parent_axis_;
};

MonomialOrder graded_lex_indices(int dim, int degree);

/// (p + d)! / (p! d!)
int basis_size(int dim, int degree);

/// Orthonormal polynomials Psi_k = sum_j coeffs(k, j) p_j over the monomial order.
class OrthonormalBasis {
 public:
  OrthonormalBasis(MonomialOrder order, Eigen::MatrixXd coeffs, double gram_residual);

  [[nodiscard]] const MonomialOrder& order() const { return order_; }
  [[nodiscard]] const Eigen::MatrixXd& coeffs() const { return coeffs_; }
  [[nodiscard]] double gram_residual() const { return gram_residual_; }
  [[nodiscard]] int dim() const { return order_.dim(); }
  [[nodiscard]] int degree() const { return order_.degree(); }
  [[nodiscard]] int size() const { return order_.size(); }
  /// Total degree of Psi_k (equal to that of its leading monomial).
  [[nodiscard]] int term_degree(int k) const { return order_[k].degree(); }

  [[nodiscard]] Eigen::VectorXd evaluate(const Eigen::VectorXd& x) const;
  /// n x N matrix of basis values, one row per point.
  [[nodiscard]] Eigen::MatrixXd evaluate_batch(const Eigen::MatrixXd& points) const;
  /// N x d matrix of partial derivatives dPsi_k / dxi_i.
  [[nodiscard]] Eigen::MatrixXd gradient(const Eigen::VectorXd& x) const;

  /// Values of the first `count` basis functions into `out`; `scratch` must hold size() doubles.
  void evaluate_into(std::span<const double> x, int count, std::span<double> scratch, std::span<double> out) const;

  /// Stable identifier derived from (d, p, coefficients).
  [[nodiscard]] std::string fingerprint() const;

  /// Basis coefficients of a polynomial given over the monomial order, by analytic projection.
  [[nodiscard]] Eigen::VectorXd project_monomials(const MomentOracle& oracle, const Eigen::VectorXd& monomial_coeffs) const;
  /// Monomial coefficients of sum_k b_k Psi_k.
  [[nodiscard]] Eigen::VectorXd to_monomials(const Eigen::VectorXd& basis_coeffs) const;

 private:
  MonomialOrder order_;
  Eigen::MatrixXd coeffs_;
  double gram_residual_;
};

/// Gram matrix M_ij = E[p_i p_j] of the monomial order under the oracle's measure.
Eigen::MatrixXd moment_gram_matrix(const MomentOracle& oracle, const MonomialOrder& order);

/// Multivariate Gram-Schmidt in exact moment space.
///
/// Modified Gram-Schmidt with one re-orthogonalization pass over coefficient
/// vectors; inner products are c_i^T M c_j with M from moment_gram_matrix().
/// Throws DegenerateMeasure if a squared norm falls to tol^2 or below, and
/// ToleranceNotMet if max |C M C^T - I| exceeds tol afterwards.
OrthonormalBasis gram_schmidt(const MomentOracle& oracle, int dim, int degree, double tol = 1e-8);

}  // namespace sgmpc
