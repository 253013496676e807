#pragma once

#include "sgmpc/polybasis.hpp"
#include "sgmpc/quadgen.hpp"
#include "sgmpc/uncertainty.hpp"

#include <Eigen/Dense>

#include <functional>
#include <map>
#include <utility>
#include <vector>

namespace sgmpc {

/// Real polynomial in the uncertain parameters, stored as a sparse map of terms.
class Polynomial {
 public:
  explicit Polynomial(int dim = 0) : dim_(dim) {}

  static Polynomial constant(int dim, double value);
  /// c * xi_axis
  static Polynomial linear(int dim, int axis, double c);

  void add_term(const MultiIndex& exponents, double coeff);

  [[nodiscard]] int dim() const { return dim_; }
  /// Highest total degree of a nonzero term; 0 for constants and the zero polynomial.
  [[nodiscard]] int degree() const;
  [[nodiscard]] const std::map<MultiIndex, double>& terms() const { return terms_; }
  [[nodiscard]] bool is_constant() const { return degree() == 0; }

  [[nodiscard]] double evaluate(const Eigen::VectorXd& xi) const;
  [[nodiscard]] double expectation(const MomentOracle& oracle) const;

  Polynomial operator+(const Polynomial& other) const;
  Polynomial operator*(const Polynomial& other) const;
  Polynomial operator*(double s) const;

 private:
  int dim_;
  std::map<MultiIndex, double> terms_;
};

/// Matrix whose entries are polynomials in xi.
class PolyMatrix {
 public:
  PolyMatrix() = default;
  PolyMatrix(int rows, int cols, int dim);

  static PolyMatrix constant(const Eigen::MatrixXd& value, int dim);

  [[nodiscard]] int rows() const { return rows_; }
  [[nodiscard]] int cols() const { return cols_; }
  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] int degree() const;

  Polynomial& operator()(int r, int c) { return entries_[static_cast<std::size_t>(r * cols_ + c)]; }
  const Polynomial& operator()(int r, int c) const { return entries_[static_cast<std::size_t>(r * cols_ + c)]; }

  [[nodiscard]] Eigen::MatrixXd evaluate(const Eigen::VectorXd& xi) const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  int dim_ = 0;
  std::vector<Polynomial> entries_;
};

/// x_{t+1} = A(xi) x_t + B(xi) u_t + D(xi) w_t with polynomial entries.
struct StochasticLTI {
  PolyMatrix A;
  PolyMatrix B;
  PolyMatrix D;  // may have zero columns

  [[nodiscard]] int n_x() const { return A.rows(); }
  [[nodiscard]] int n_u() const { return B.cols(); }
  [[nodiscard]] int n_w() const { return D.cols(); }
  [[nodiscard]] int dim() const { return A.dim(); }
  [[nodiscard]] int degree() const;
  /// Throws DimensionMismatch on inconsistent shapes.
  void validate() const;
};

/// Deterministic matrices of the system at one parameter value.
struct DiscreteModel {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd D;
};

using ModelAt = std::function<DiscreteModel(const Eigen::VectorXd& xi)>;
using VectorAt = std::function<Eigen::VectorXd(const Eigen::VectorXd& xi)>;

/// Stacked expansion coefficients [c_1; ...; c_Np], each block of length base_dim.
class CoeffVector {
 public:
  CoeffVector() = default;
  CoeffVector(int base_dim, int n_basis);
  CoeffVector(Eigen::VectorXd stacked, int base_dim);

  /// Block 1 = v, all others zero.
  static CoeffVector deterministic(const Eigen::VectorXd& v, int n_basis);

  [[nodiscard]] int base_dim() const { return base_dim_; }
  [[nodiscard]] int n_basis() const { return n_basis_; }
  [[nodiscard]] const Eigen::VectorXd& stacked() const { return coeffs_; }
  Eigen::VectorXd& stacked() { return coeffs_; }

  /// Block k (0-based; block 0 is the mean).
  [[nodiscard]] Eigen::VectorXd block(int k) const { return coeffs_.segment(k * base_dim_, base_dim_); }
  /// base_dim x n_basis matrix whose column k is c_k.
  [[nodiscard]] Eigen::MatrixXd as_matrix() const;

 private:
  int base_dim_ = 0;
  int n_basis_ = 0;
  Eigen::VectorXd coeffs_;
};

/// Lifted deterministic system on the expansion coefficients.
///
/// Row-block j, column-block k of each hat matrix holds <M(xi) Psi_k, Psi_j>
/// evaluated with the quadrature rule; coefficient vectors are stacked
/// basis-major, so entry (k, i) of x_hat sits at k * n_x + i.
struct GalerkinSystem {
  Eigen::MatrixXd A_hat;
  Eigen::MatrixXd B_hat;
  Eigen::MatrixXd D_hat;
  Eigen::MatrixXd V;  // Gramian v_ij = sum_l Psi_i Psi_j w_l
  int n_x = 0;
  int n_u = 0;
  int n_w = 0;
  int n_basis = 0;
  std::string basis_id;

  /// Columns of B_hat acting on a deterministic input (block 1 of u_hat).
  [[nodiscard]] Eigen::MatrixXd B_mean() const { return B_hat.leftCols(n_u); }
};

/// Blocks <f(xi) Psi_k, Psi_j> of a matrix-valued function, by quadrature.
Eigen::MatrixXd project_operator(const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& f, int rows, int cols,
                                 const OrthonormalBasis& basis, const QuadratureRule& rule);

/// Galerkin projection of a polynomial system. Throws DegreeOverflow when an
/// entry degree plus the basis degree exceeds the rule's exactness order.
GalerkinSystem project_matrices(const StochasticLTI& sys, const OrthonormalBasis& basis, const QuadratureRule& rule);

/// Projection of a system known only through its value at each node (e.g. discretized per node).
GalerkinSystem project_sampled(const ModelAt& model, const OrthonormalBasis& basis, const QuadratureRule& rule);

/// Block k = sum_l f(xi_l) Psi_k(xi_l) w_l.
CoeffVector expand_function(const VectorAt& f, const OrthonormalBasis& basis, const QuadratureRule& rule);

/// v_ij = sum_l Psi_i(xi_l) Psi_j(xi_l) w_l; upper triangle computed, then mirrored.
Eigen::MatrixXd gramian_v(const OrthonormalBasis& basis, const QuadratureRule& rule);

/// x_hat_0 .. x_hat_T. An empty disturbance sequence means zero disturbance.
std::vector<CoeffVector> propagate(const GalerkinSystem& gs, const CoeffVector& x0, const std::vector<CoeffVector>& u,
                                   const std::vector<CoeffVector>& w, int horizon);

struct MeanVar {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
};

/// Mean = block 1, variance = elementwise sum of squares of the remaining blocks.
MeanVar mean_var(const CoeffVector& x);

/// Row i = sum_k c_k Psi_k(xi_i).
Eigen::MatrixXd sample_surrogate(const CoeffVector& x, const OrthonormalBasis& basis, const Eigen::MatrixXd& points);

}  // namespace sgmpc
