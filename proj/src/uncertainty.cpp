#include "sgmpc/uncertainty.hpp"

#include "sgmpc/error.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace sgmpc {

MultiIndex::MultiIndex(std::vector<int> exponents) : exponents_(std::move(exponents)) {
  for (int e : exponents_) {
    if (e < 0) throw Error(ErrorCode::kInvalidArgument, "negative exponent in multi-index");
  }
}

MultiIndex MultiIndex::zero(int dim) { return MultiIndex(std::vector<int>(static_cast<std::size_t>(dim), 0)); }

MultiIndex MultiIndex::unit(int dim, int axis) {
  std::vector<int> e(static_cast<std::size_t>(dim), 0);
  e[static_cast<std::size_t>(axis)] = 1;
  return MultiIndex(std::move(e));
}

int MultiIndex::degree() const { return std::accumulate(exponents_.begin(), exponents_.end(), 0); }

MultiIndex MultiIndex::operator+(const MultiIndex& other) const {
  if (other.dim() != dim()) throw Error(ErrorCode::kDimensionMismatch, "multi-index sum");
  std::vector<int> e = exponents_;
  for (std::size_t i = 0; i < e.size(); ++i) e[i] += other.exponents_[i];
  return MultiIndex(std::move(e));
}

MultiIndex MultiIndex::lowered(int axis) const {
  std::vector<int> e = exponents_;
  --e[static_cast<std::size_t>(axis)];
  return MultiIndex(std::move(e));
}

namespace {

constexpr double kWeightRenormTol = 1e-9;
constexpr double kPsdRelTol = 1e-10;
constexpr double kSampleNegEigTol = 1e-8;

Eigen::MatrixXd square_root_factor(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  // Rank-deficient covariance: symmetric square root from the eigendecomposition.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  Eigen::VectorXd lambda = eig.eigenvalues();
  if (lambda.minCoeff() < -kSampleNegEigTol) {
    throw Error(ErrorCode::kCholeskyFailure, "covariance has a negative eigenvalue");
  }
  lambda = lambda.cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * lambda.asDiagonal();
}

}  // namespace

GaussianMixture::GaussianMixture(std::vector<MixtureComponent> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw Error(ErrorCode::kInvalidArgument, "mixture needs at least one component");
  dim_ = static_cast<int>(components_.front().mean.size());
  if (dim_ < 1) throw Error(ErrorCode::kDimensionMismatch, "mixture dimension must be >= 1");

  double total = 0.0;
  for (const auto& c : components_) {
    if (c.mean.size() != dim_ || c.covariance.rows() != dim_ || c.covariance.cols() != dim_) {
      throw Error(ErrorCode::kDimensionMismatch, "component mean/covariance dimension");
    }
    if (!(c.weight >= 0.0) || c.weight > 1.0) {
      throw Error(ErrorCode::kWeightSumInvalid, "component weight outside [0,1]");
    }
    total += c.weight;

    const double scale = std::max(c.covariance.norm(), 1e-300);
    if ((c.covariance - c.covariance.transpose()).cwiseAbs().maxCoeff() > kPsdRelTol * scale) {
      throw Error(ErrorCode::kNonPSDCovariance, "covariance is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c.covariance, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -kPsdRelTol * scale) {
      throw Error(ErrorCode::kNonPSDCovariance, "covariance has a negative eigenvalue");
    }
  }
  if (std::abs(total - 1.0) > kWeightRenormTol) {
    throw Error(ErrorCode::kWeightSumInvalid, "weights sum to " + std::to_string(total));
  }
  for (auto& c : components_) c.weight /= total;
}

GaussianMixture GaussianMixture::standard_normal(int dim) {
  return GaussianMixture({MixtureComponent{1.0, Eigen::VectorXd::Zero(dim), Eigen::MatrixXd::Identity(dim, dim)}});
}

Eigen::VectorXd GaussianMixture::mean() const {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(dim_);
  for (const auto& c : components_) m += c.weight * c.mean;
  return m;
}

Eigen::MatrixXd GaussianMixture::covariance() const {
  const Eigen::VectorXd m = mean();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(dim_, dim_);
  for (const auto& c : components_) {
    const Eigen::VectorXd dm = c.mean - m;
    s += c.weight * (c.covariance + dm * dm.transpose());
  }
  return s;
}

SampleBatch sample(const GaussianMixture& gm, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "sample count must be >= 1");
  const int d = gm.dim();
  std::vector<Eigen::MatrixXd> factors;
  std::vector<double> cumulative;
  double acc = 0.0;
  for (const auto& c : gm.components()) {
    factors.push_back(square_root_factor(c.covariance));
    acc += c.weight;
    cumulative.push_back(acc);
  }
  cumulative.back() = 1.0;

  SampleBatch batch;
  batch.points.resize(static_cast<Eigen::Index>(n), d);
  batch.labels.resize(n);
  batch.seed = seed;
  batch.generator_id = "mt19937_64+normal_distribution";

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(d);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = uniform(rng);
    std::size_t j = 0;
    while (j + 1 < cumulative.size() && u >= cumulative[j]) ++j;
    for (int k = 0; k < d; ++k) z(k) = normal(rng);
    const auto& comp = gm.components()[j];
    batch.points.row(static_cast<Eigen::Index>(i)) = (comp.mean + factors[j] * z).transpose();
    batch.labels[i] = static_cast<int>(j);
  }
  return batch;
}

double pdf_eval(const GaussianMixture& gm, const Eigen::VectorXd& x) {
  if (x.size() != gm.dim()) throw Error(ErrorCode::kDimensionMismatch, "pdf_eval point dimension");
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  double density = 0.0;
  for (const auto& c : gm.components()) {
    if (c.weight == 0.0) continue;
    Eigen::LLT<Eigen::MatrixXd> llt(c.covariance);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::kCholeskyFailure, "density undefined for singular covariance");
    }
    const Eigen::VectorXd r = llt.matrixL().solve(x - c.mean);
    const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    density += c.weight * std::exp(-0.5 * (r.squaredNorm() + log_det + gm.dim() * log_2pi));
  }
  return density;
}

double raw_moment(const GaussianMixture& gm, const MultiIndex& alpha) {
  if (alpha.dim() != gm.dim()) throw Error(ErrorCode::kDimensionMismatch, "raw_moment index dimension");
  return MixtureMoments(gm, alpha.degree()).moment(alpha);
}

namespace {

// All multi-indices of total degree <= p, grouped by degree.
void enumerate_by_degree(int d, int p, std::vector<MultiIndex>& out) {
  std::vector<int> e(static_cast<std::size_t>(d), 0);
  for (int deg = 0; deg <= p; ++deg) {
    // Compositions of deg into d parts, first coordinate descending.
    auto rec = [&](auto&& self, int pos, int remaining) -> void {
      if (pos == d - 1) {
        e[static_cast<std::size_t>(pos)] = remaining;
        out.emplace_back(e);
        return;
      }
      for (int a = remaining; a >= 0; --a) {
        e[static_cast<std::size_t>(pos)] = a;
        self(self, pos + 1, remaining - a);
      }
    };
    rec(rec, 0, deg);
  }
}

}  // namespace

MixtureMoments::MixtureMoments(const GaussianMixture& gm, int max_degree)
    : dim_(gm.dim()), max_degree_(max_degree) {
  if (max_degree < 0) throw Error(ErrorCode::kInvalidArgument, "negative moment degree cap");
  const std::size_t ncomp = gm.size();
  for (const auto& c : gm.components()) weights_.push_back(c.weight);

  std::vector<MultiIndex> indices;
  enumerate_by_degree(dim_, max_degree_, indices);
  for (const auto& alpha : indices) {
    std::vector<double> values(ncomp, 1.0);
    if (alpha.degree() > 0) {
      int i = 0;
      while (alpha[i] == 0) ++i;
      const MultiIndex beta = alpha.lowered(i);
      const auto& m_beta = table_.at(beta);
      for (std::size_t j = 0; j < ncomp; ++j) {
        const auto& comp = gm.components()[j];
        double v = comp.mean(i) * m_beta[j];
        for (int k = 0; k < dim_; ++k) {
          if (beta[k] == 0) continue;
          v += comp.covariance(i, k) * beta[k] * table_.at(beta.lowered(k))[j];
        }
        values[j] = v;
      }
    }
    table_.emplace(alpha, std::move(values));
  }
}

double MixtureMoments::moment(const MultiIndex& alpha) const {
  if (alpha.dim() != dim_) throw Error(ErrorCode::kDimensionMismatch, "moment index dimension");
  if (alpha.degree() > max_degree_) {
    throw Error(ErrorCode::kDegreeOverflow,
                "moment degree " + std::to_string(alpha.degree()) + " exceeds cap " + std::to_string(max_degree_));
  }
  const auto& values = table_.at(alpha);
  double m = 0.0;
  for (std::size_t j = 0; j < values.size(); ++j) m += weights_[j] * values[j];
  return m;
}

double MixtureMoments::component_moment(std::size_t component, const MultiIndex& alpha) const {
  if (alpha.degree() > max_degree_) throw Error(ErrorCode::kDegreeOverflow, "moment degree exceeds cap");
  return table_.at(alpha).at(component);
}

}  // namespace sgmpc
