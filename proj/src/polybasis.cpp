#include "sgmpc/polybasis.hpp"

#include "sgmpc/error.hpp"

#include <cmath>
#include <cstring>
#include <cstdio>

namespace sgmpc {

MonomialOrder::MonomialOrder(int dim, int degree) : dim_(dim), degree_(degree) {
  if (dim < 1) throw Error(ErrorCode::kInvalidArgument, "monomial dimension must be >= 1");
  if (degree < 0) throw Error(ErrorCode::kInvalidArgument, "monomial degree must be >= 0");

  std::vector<int> e(static_cast<std::size_t>(dim), 0);
  for (int deg = 0; deg <= degree; ++deg) {
    auto rec = [&](auto&& self, int pos, int remaining) -> void {
      if (pos == dim - 1) {
        e[static_cast<std::size_t>(pos)] = remaining;
        indices_.emplace_back(e);
        return;
      }
      for (int a = remaining; a >= 0; --a) {
        e[static_cast<std::size_t>(pos)] = a;
        self(self, pos + 1, remaining - a);
      }
    };
    rec(rec, 0, deg);
  }

  const int n = size();
  lowered_.assign(static_cast<std::size_t>(n * dim), -1);
  parent_.assign(static_cast<std::size_t>(n), -1);
  parent_axis_.assign(static_cast<std::size_t>(n), -1);
  for (int k = 0; k < n; ++k) {
    const MultiIndex& a = indices_[static_cast<std::size_t>(k)];
    for (int i = 0; i < dim; ++i) {
      if (a[i] > 0) lowered_[static_cast<std::size_t>(k * dim + i)] = find(a.lowered(i));
    }
    for (int i = 0; i < dim; ++i) {
      if (a[i] > 0) {
        parent_[static_cast<std::size_t>(k)] = lowered(k, i);
        parent_axis_[static_cast<std::size_t>(k)] = i;
        break;
      }
    }
  }
}

int MonomialOrder::find(const MultiIndex& alpha) const {
  if (alpha.dim() != dim_ || alpha.degree() > degree_) return -1;
  // Indices are sorted by degree, then lexicographically descending.
  std::size_t lo = 0;
  std::size_t hi = indices_.size();
  const auto key = [](const MultiIndex& m) { return m.degree(); };
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    const MultiIndex& m = indices_[mid];
    bool before;
    if (key(m) != key(alpha)) {
      before = key(m) < key(alpha);
    } else {
      before = m > alpha;
    }
    if (before) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  return (lo < indices_.size() && indices_[lo] == alpha) ? static_cast<int>(lo) : -1;
}

void MonomialOrder::monomials(std::span<const double> x, std::span<double> out) const {
  out[0] = 1.0;
  for (std::size_t k = 1; k < indices_.size(); ++k) {
    out[k] = out[static_cast<std::size_t>(parent_[k])] * x[static_cast<std::size_t>(parent_axis_[k])];
  }
}

MonomialOrder graded_lex_indices(int dim, int degree) { return MonomialOrder(dim, degree); }

int basis_size(int dim, int degree) {
  // C(p + d, d) computed incrementally; exact in integers for the sizes used here.
  long long n = 1;
  for (int i = 1; i <= dim; ++i) n = n * (degree + i) / i;
  return static_cast<int>(n);
}

OrthonormalBasis::OrthonormalBasis(MonomialOrder order, Eigen::MatrixXd coeffs, double gram_residual)
    : order_(std::move(order)), coeffs_(std::move(coeffs)), gram_residual_(gram_residual) {
  if (coeffs_.rows() != order_.size() || coeffs_.cols() != order_.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "basis coefficient matrix must be N x N");
  }
}

void OrthonormalBasis::evaluate_into(std::span<const double> x, int count, std::span<double> scratch,
                                     std::span<double> out) const {
  order_.monomials(x, scratch);
  for (int k = 0; k < count; ++k) {
    double v = 0.0;
    for (int j = 0; j <= k; ++j) v += coeffs_(k, j) * scratch[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(k)] = v;
  }
}

Eigen::VectorXd OrthonormalBasis::evaluate(const Eigen::VectorXd& x) const {
  if (x.size() != dim()) throw Error(ErrorCode::kDimensionMismatch, "basis evaluation point dimension");
  Eigen::VectorXd mono(size());
  Eigen::VectorXd out(size());
  evaluate_into({x.data(), static_cast<std::size_t>(x.size())}, size(), {mono.data(), static_cast<std::size_t>(size())},
                {out.data(), static_cast<std::size_t>(size())});
  return out;
}

Eigen::MatrixXd OrthonormalBasis::evaluate_batch(const Eigen::MatrixXd& points) const {
  if (points.cols() != dim()) throw Error(ErrorCode::kDimensionMismatch, "basis batch point dimension");
  const int n = size();
  Eigen::MatrixXd out(points.rows(), n);
  Eigen::VectorXd x(dim());
  Eigen::VectorXd mono(n);
  Eigen::VectorXd vals(n);
  for (Eigen::Index r = 0; r < points.rows(); ++r) {
    x = points.row(r).transpose();
    evaluate_into({x.data(), static_cast<std::size_t>(x.size())}, n, {mono.data(), static_cast<std::size_t>(n)},
                  {vals.data(), static_cast<std::size_t>(n)});
    out.row(r) = vals.transpose();
  }
  return out;
}

Eigen::MatrixXd OrthonormalBasis::gradient(const Eigen::VectorXd& x) const {
  if (x.size() != dim()) throw Error(ErrorCode::kDimensionMismatch, "basis gradient point dimension");
  const int n = size();
  Eigen::VectorXd mono(n);
  order_.monomials({x.data(), static_cast<std::size_t>(x.size())}, {mono.data(), static_cast<std::size_t>(n)});
  // d p_k / d xi_i = alpha_{k,i} * p_{k - e_i}
  Eigen::MatrixXd dmono = Eigen::MatrixXd::Zero(n, dim());
  for (int k = 1; k < n; ++k) {
    for (int i = 0; i < dim(); ++i) {
      const int low = order_.lowered(k, i);
      if (low >= 0) dmono(k, i) = order_[k][i] * mono(low);
    }
  }
  return coeffs_ * dmono;
}

std::string OrthonormalBasis::fingerprint() const {
  // FNV-1a over dimension, degree and coefficient bytes.
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  const int header[2] = {dim(), degree()};
  mix(header, sizeof(header));
  mix(coeffs_.data(), sizeof(double) * static_cast<std::size_t>(coeffs_.size()));
  char buf[40];
  std::snprintf(buf, sizeof(buf), "d%dp%d-%016llx", dim(), degree(), static_cast<unsigned long long>(h));
  return buf;
}

Eigen::VectorXd OrthonormalBasis::project_monomials(const MomentOracle& oracle,
                                                    const Eigen::VectorXd& monomial_coeffs) const {
  if (monomial_coeffs.size() != size()) throw Error(ErrorCode::kDimensionMismatch, "monomial coefficient length");
  const Eigen::MatrixXd m = moment_gram_matrix(oracle, order_);
  return coeffs_ * (m * monomial_coeffs);
}

Eigen::VectorXd OrthonormalBasis::to_monomials(const Eigen::VectorXd& basis_coeffs) const {
  if (basis_coeffs.size() != size()) throw Error(ErrorCode::kDimensionMismatch, "basis coefficient length");
  return coeffs_.transpose() * basis_coeffs;
}

Eigen::MatrixXd moment_gram_matrix(const MomentOracle& oracle, const MonomialOrder& order) {
  const int n = order.size();
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      m(i, j) = oracle.moment(order[i] + order[j]);
      m(j, i) = m(i, j);
    }
  }
  return m;
}

OrthonormalBasis gram_schmidt(const MomentOracle& oracle, int dim, int degree, double tol) {
  if (!(tol > 0.0)) throw Error(ErrorCode::kInvalidArgument, "Gram-Schmidt tolerance must be positive");
  if (oracle.dim() != dim) throw Error(ErrorCode::kDimensionMismatch, "oracle dimension");
  if (oracle.max_degree() < 2 * degree) {
    throw Error(ErrorCode::kDegreeOverflow, "oracle cannot supply moments of degree " + std::to_string(2 * degree));
  }
  MonomialOrder order(dim, degree);
  const int n = order.size();
  const Eigen::MatrixXd m = moment_gram_matrix(oracle, order);

  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd mc(n);
  for (int k = 0; k < n; ++k) {
    Eigen::VectorXd v = Eigen::VectorXd::Unit(n, k);
    for (int pass = 0; pass < 2; ++pass) {
      for (int i = 0; i < k; ++i) {
        // <v, Psi_i>, exploiting the triangular support of Psi_i.
        mc.noalias() = m.leftCols(i + 1) * c.row(i).head(i + 1).transpose();
        const double proj = v.head(k + 1).dot(mc.head(k + 1));
        v.head(i + 1) -= proj * c.row(i).head(i + 1).transpose();
      }
    }
    const double norm2 = v.head(k + 1).dot(m.topLeftCorner(k + 1, k + 1) * v.head(k + 1));
    if (!(norm2 > tol * tol)) {
      throw Error(ErrorCode::kDegenerateMeasure,
                  "basis function " + std::to_string(k + 1) + " has squared norm " + std::to_string(norm2));
    }
    c.row(k) = v.transpose() / std::sqrt(norm2);
  }
  c.triangularView<Eigen::StrictlyUpper>().setZero();

  const Eigen::MatrixXd gram = c * m * c.transpose();
  const double residual = (gram - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
  if (residual > tol) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "Gram residual %.3e exceeds tolerance %.3e", residual, tol);
    throw Error(ErrorCode::kToleranceNotMet, buf);
  }
  return OrthonormalBasis(std::move(order), std::move(c), residual);
}

}  // namespace sgmpc
