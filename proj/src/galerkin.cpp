#include "sgmpc/galerkin.hpp"

#include "sgmpc/error.hpp"

#include <algorithm>

namespace sgmpc {

Polynomial Polynomial::constant(int dim, double value) {
  Polynomial p(dim);
  p.add_term(MultiIndex::zero(dim), value);
  return p;
}

Polynomial Polynomial::linear(int dim, int axis, double c) {
  Polynomial p(dim);
  p.add_term(MultiIndex::unit(dim, axis), c);
  return p;
}

void Polynomial::add_term(const MultiIndex& exponents, double coeff) {
  if (exponents.dim() != dim_) throw Error(ErrorCode::kDimensionMismatch, "polynomial term dimension");
  if (coeff == 0.0) return;
  auto [it, inserted] = terms_.emplace(exponents, coeff);
  if (!inserted) {
    it->second += coeff;
    if (it->second == 0.0) terms_.erase(it);
  }
}

int Polynomial::degree() const {
  int deg = 0;
  for (const auto& [alpha, c] : terms_) deg = std::max(deg, alpha.degree());
  return deg;
}

double Polynomial::evaluate(const Eigen::VectorXd& xi) const {
  if (xi.size() != dim_ && !terms_.empty()) throw Error(ErrorCode::kDimensionMismatch, "polynomial evaluation point");
  double sum = 0.0;
  for (const auto& [alpha, c] : terms_) {
    double m = c;
    for (int i = 0; i < dim_; ++i) {
      for (int e = 0; e < alpha[i]; ++e) m *= xi(i);
    }
    sum += m;
  }
  return sum;
}

double Polynomial::expectation(const MomentOracle& oracle) const {
  double sum = 0.0;
  for (const auto& [alpha, c] : terms_) sum += c * oracle.moment(alpha);
  return sum;
}

Polynomial Polynomial::operator+(const Polynomial& other) const {
  Polynomial out = *this;
  for (const auto& [alpha, c] : other.terms_) out.add_term(alpha, c);
  return out;
}

Polynomial Polynomial::operator*(const Polynomial& other) const {
  Polynomial out(dim_);
  for (const auto& [a, ca] : terms_) {
    for (const auto& [b, cb] : other.terms_) out.add_term(a + b, ca * cb);
  }
  return out;
}

Polynomial Polynomial::operator*(double s) const {
  Polynomial out(dim_);
  for (const auto& [alpha, c] : terms_) out.add_term(alpha, c * s);
  return out;
}

PolyMatrix::PolyMatrix(int rows, int cols, int dim)
    : rows_(rows), cols_(cols), dim_(dim), entries_(static_cast<std::size_t>(rows * cols), Polynomial(dim)) {}

PolyMatrix PolyMatrix::constant(const Eigen::MatrixXd& value, int dim) {
  PolyMatrix m(static_cast<int>(value.rows()), static_cast<int>(value.cols()), dim);
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) m(r, c) = Polynomial::constant(dim, value(r, c));
  }
  return m;
}

int PolyMatrix::degree() const {
  int deg = 0;
  for (const auto& e : entries_) deg = std::max(deg, e.degree());
  return deg;
}

Eigen::MatrixXd PolyMatrix::evaluate(const Eigen::VectorXd& xi) const {
  Eigen::MatrixXd out(rows_, cols_);
  for (int r = 0; r < rows_; ++r) {
    for (int c = 0; c < cols_; ++c) out(r, c) = (*this)(r, c).evaluate(xi);
  }
  return out;
}

int StochasticLTI::degree() const { return std::max({A.degree(), B.degree(), D.degree()}); }

void StochasticLTI::validate() const {
  if (A.rows() != A.cols()) throw Error(ErrorCode::kDimensionMismatch, "A must be square");
  if (B.rows() != A.rows()) throw Error(ErrorCode::kDimensionMismatch, "B rows must equal n_x");
  if (D.rows() != A.rows() && D.cols() > 0) throw Error(ErrorCode::kDimensionMismatch, "D rows must equal n_x");
  if (B.dim() != A.dim() || (D.cols() > 0 && D.dim() != A.dim())) {
    throw Error(ErrorCode::kDimensionMismatch, "system matrices use different parameter dimensions");
  }
}

CoeffVector::CoeffVector(int base_dim, int n_basis)
    : base_dim_(base_dim), n_basis_(n_basis), coeffs_(Eigen::VectorXd::Zero(base_dim * n_basis)) {}

CoeffVector::CoeffVector(Eigen::VectorXd stacked, int base_dim) : base_dim_(base_dim), coeffs_(std::move(stacked)) {
  if (base_dim <= 0 || coeffs_.size() % base_dim != 0) {
    throw Error(ErrorCode::kDimensionMismatch, "coefficient vector length is not a multiple of the base dimension");
  }
  n_basis_ = static_cast<int>(coeffs_.size() / base_dim);
}

CoeffVector CoeffVector::deterministic(const Eigen::VectorXd& v, int n_basis) {
  CoeffVector out(static_cast<int>(v.size()), n_basis);
  out.coeffs_.head(v.size()) = v;
  return out;
}

Eigen::MatrixXd CoeffVector::as_matrix() const {
  return Eigen::Map<const Eigen::MatrixXd>(coeffs_.data(), base_dim_, n_basis_);
}

Eigen::MatrixXd project_operator(const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& f, int rows, int cols,
                                 const OrthonormalBasis& basis, const QuadratureRule& rule) {
  const int n = basis.size();
  const Eigen::MatrixXd phi = basis_matrix(basis, rule.nodes, n);  // N x M
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows * n, cols * n);
  for (int l = 0; l < rule.size(); ++l) {
    const Eigen::MatrixXd value = f(rule.nodes.row(l).transpose());
    if (value.rows() != rows || value.cols() != cols) {
      throw Error(ErrorCode::kDimensionMismatch, "node matrix shape");
    }
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        const double s = phi(k, l) * phi(j, l) * rule.weights(l);
        out.block(j * rows, k * cols, rows, cols) += s * value;
      }
    }
  }
  return out;
}

namespace {

void check_rule_basis(const OrthonormalBasis& basis, const QuadratureRule& rule) {
  if (rule.dim() != basis.dim()) throw Error(ErrorCode::kDimensionMismatch, "rule/basis parameter dimension");
  if (rule.size() < 1) throw Error(ErrorCode::kInvalidArgument, "empty quadrature rule");
}

}  // namespace

GalerkinSystem project_matrices(const StochasticLTI& sys, const OrthonormalBasis& basis, const QuadratureRule& rule) {
  sys.validate();
  check_rule_basis(basis, rule);
  if (sys.dim() != basis.dim()) throw Error(ErrorCode::kDimensionMismatch, "system/basis parameter dimension");
  if (rule.p != basis.degree()) throw Error(ErrorCode::kInvalidArgument, "rule order does not match basis degree");
  if (sys.degree() + basis.degree() > 2 * rule.p) {
    throw Error(ErrorCode::kDegreeOverflow, "entry degree " + std::to_string(sys.degree()) + " + basis degree " +
                                                std::to_string(basis.degree()) + " exceeds rule order " +
                                                std::to_string(2 * rule.p));
  }
  return project_sampled(
      [&sys](const Eigen::VectorXd& xi) {
        return DiscreteModel{sys.A.evaluate(xi), sys.B.evaluate(xi),
                             sys.n_w() > 0 ? sys.D.evaluate(xi) : Eigen::MatrixXd(sys.n_x(), 0)};
      },
      basis, rule);
}

GalerkinSystem project_sampled(const ModelAt& model, const OrthonormalBasis& basis, const QuadratureRule& rule) {
  check_rule_basis(basis, rule);
  const int n = basis.size();
  const int m = rule.size();
  std::vector<DiscreteModel> at_nodes;
  at_nodes.reserve(static_cast<std::size_t>(m));
  for (int l = 0; l < m; ++l) at_nodes.push_back(model(rule.nodes.row(l).transpose()));

  GalerkinSystem gs;
  gs.n_x = static_cast<int>(at_nodes.front().A.rows());
  gs.n_u = static_cast<int>(at_nodes.front().B.cols());
  gs.n_w = static_cast<int>(at_nodes.front().D.cols());
  gs.n_basis = n;
  gs.basis_id = basis.fingerprint();

  const Eigen::MatrixXd phi = basis_matrix(basis, rule.nodes, n);
  gs.A_hat = Eigen::MatrixXd::Zero(gs.n_x * n, gs.n_x * n);
  gs.B_hat = Eigen::MatrixXd::Zero(gs.n_x * n, gs.n_u * n);
  gs.D_hat = Eigen::MatrixXd::Zero(gs.n_x * n, gs.n_w * n);
  for (int l = 0; l < m; ++l) {
    const DiscreteModel& dm = at_nodes[static_cast<std::size_t>(l)];
    if (dm.A.rows() != gs.n_x || dm.A.cols() != gs.n_x || dm.B.rows() != gs.n_x || dm.B.cols() != gs.n_u ||
        dm.D.cols() != gs.n_w || (gs.n_w > 0 && dm.D.rows() != gs.n_x)) {
      throw Error(ErrorCode::kDimensionMismatch, "node model shape");
    }
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        const double s = phi(k, l) * phi(j, l) * rule.weights(l);
        gs.A_hat.block(j * gs.n_x, k * gs.n_x, gs.n_x, gs.n_x) += s * dm.A;
        gs.B_hat.block(j * gs.n_x, k * gs.n_u, gs.n_x, gs.n_u) += s * dm.B;
        if (gs.n_w > 0) gs.D_hat.block(j * gs.n_x, k * gs.n_w, gs.n_x, gs.n_w) += s * dm.D;
      }
    }
  }
  gs.V = gramian_v(basis, rule);
  return gs;
}

CoeffVector expand_function(const VectorAt& f, const OrthonormalBasis& basis, const QuadratureRule& rule) {
  check_rule_basis(basis, rule);
  const int n = basis.size();
  const Eigen::MatrixXd phi = basis_matrix(basis, rule.nodes, n);
  Eigen::MatrixXd blocks;  // base_dim x N
  for (int l = 0; l < rule.size(); ++l) {
    const Eigen::VectorXd v = f(rule.nodes.row(l).transpose());
    if (l == 0) blocks = Eigen::MatrixXd::Zero(v.size(), n);
    if (v.size() != blocks.rows()) throw Error(ErrorCode::kDimensionMismatch, "function value length varies");
    blocks += rule.weights(l) * v * phi.col(l).transpose();
  }
  return CoeffVector(Eigen::Map<const Eigen::VectorXd>(blocks.data(), blocks.size()), static_cast<int>(blocks.rows()));
}

Eigen::MatrixXd gramian_v(const OrthonormalBasis& basis, const QuadratureRule& rule) {
  check_rule_basis(basis, rule);
  const int n = basis.size();
  const Eigen::MatrixXd phi = basis_matrix(basis, rule.nodes, n);
  Eigen::MatrixXd v(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      double s = 0.0;
      for (int l = 0; l < rule.size(); ++l) s += phi(i, l) * phi(j, l) * rule.weights(l);
      v(i, j) = s;
      v(j, i) = s;
    }
  }
  return v;
}

std::vector<CoeffVector> propagate(const GalerkinSystem& gs, const CoeffVector& x0, const std::vector<CoeffVector>& u,
                                   const std::vector<CoeffVector>& w, int horizon) {
  if (x0.stacked().size() != gs.A_hat.rows()) throw Error(ErrorCode::kDimensionMismatch, "initial coefficients");
  if (static_cast<int>(u.size()) != horizon) throw Error(ErrorCode::kDimensionMismatch, "input sequence length");
  if (!w.empty() && static_cast<int>(w.size()) != horizon) {
    throw Error(ErrorCode::kDimensionMismatch, "disturbance sequence length");
  }
  std::vector<CoeffVector> traj;
  traj.reserve(static_cast<std::size_t>(horizon + 1));
  traj.push_back(x0);
  for (int t = 0; t < horizon; ++t) {
    const auto& ut = u[static_cast<std::size_t>(t)].stacked();
    if (ut.size() != gs.B_hat.cols()) throw Error(ErrorCode::kDimensionMismatch, "input coefficients");
    Eigen::VectorXd next = gs.A_hat * traj.back().stacked() + gs.B_hat * ut;
    if (!w.empty()) {
      const auto& wt = w[static_cast<std::size_t>(t)].stacked();
      if (wt.size() != gs.D_hat.cols()) throw Error(ErrorCode::kDimensionMismatch, "disturbance coefficients");
      next += gs.D_hat * wt;
    }
    traj.emplace_back(std::move(next), gs.n_x);
  }
  return traj;
}

MeanVar mean_var(const CoeffVector& x) {
  MeanVar mv;
  const Eigen::MatrixXd c = x.as_matrix();
  mv.mean = c.col(0);
  mv.var = c.rightCols(c.cols() - 1).rowwise().squaredNorm();
  return mv;
}

Eigen::MatrixXd sample_surrogate(const CoeffVector& x, const OrthonormalBasis& basis, const Eigen::MatrixXd& points) {
  if (points.cols() != basis.dim()) throw Error(ErrorCode::kDimensionMismatch, "surrogate sample dimension");
  if (x.n_basis() != basis.size()) throw Error(ErrorCode::kDimensionMismatch, "coefficient/basis size");
  return basis.evaluate_batch(points) * x.as_matrix().transpose();
}

}  // namespace sgmpc
