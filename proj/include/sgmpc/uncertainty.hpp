#pragma once

#include <Eigen/Dense>

#include <compare>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace sgmpc {

/// Exponent vector of a monomial xi_1^a_1 ... xi_d^a_d.
class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::vector<int> exponents);

  static MultiIndex zero(int dim);
  static MultiIndex unit(int dim, int axis);

  [[nodiscard]] int dim() const { return static_cast<int>(exponents_.size()); }
  [[nodiscard]] int degree() const;
  [[nodiscard]] int operator[](int i) const { return exponents_[static_cast<std::size_t>(i)]; }
  [[nodiscard]] const std::vector<int>& exponents() const { return exponents_; }

  [[nodiscard]] MultiIndex operator+(const MultiIndex& other) const;
  /// Lowers exponent `axis` by one; requires it to be positive.
  [[nodiscard]] MultiIndex lowered(int axis) const;

  auto operator<=>(const MultiIndex&) const = default;
  bool operator==(const MultiIndex&) const = default;

 private:
  std::vector<int> exponents_;
};

/// Anything that can report raw moments E[xi^alpha] of a probability measure.
class MomentOracle {
 public:
  virtual ~MomentOracle() = default;
  [[nodiscard]] virtual int dim() const = 0;
  [[nodiscard]] virtual int max_degree() const = 0;
  /// Throws DegreeOverflow when alpha exceeds max_degree().
  [[nodiscard]] virtual double moment(const MultiIndex& alpha) const = 0;
};

struct MixtureComponent {
  double weight = 0.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

/// Joint density of the uncertain parameters: a finite Gaussian mixture.
class GaussianMixture {
 public:
  /// Validates and (if within 1e-9) renormalizes the weights.
  explicit GaussianMixture(std::vector<MixtureComponent> components);

  static GaussianMixture standard_normal(int dim);

  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] const std::vector<MixtureComponent>& components() const { return components_; }
  [[nodiscard]] std::size_t size() const { return components_.size(); }

  [[nodiscard]] Eigen::VectorXd mean() const;
  [[nodiscard]] Eigen::MatrixXd covariance() const;

 private:
  std::vector<MixtureComponent> components_;
  int dim_ = 0;
};

struct SampleBatch {
  Eigen::MatrixXd points;    // n x d
  std::vector<int> labels;   // mixture component of each draw
  std::uint64_t seed = 0;
  std::string generator_id;
};

/// n i.i.d. draws; bit-identical for identical (mixture, n, seed).
SampleBatch sample(const GaussianMixture& gm, std::size_t n, std::uint64_t seed);

double pdf_eval(const GaussianMixture& gm, const Eigen::VectorXd& x);

/// Exact E[xi^alpha] under the mixture.
double raw_moment(const GaussianMixture& gm, const MultiIndex& alpha);

/// Default moment-degree cap for a model order p.
constexpr int default_moment_cap(int p) { return 4 * p + 2; }

/// Precomputed table of all mixture moments up to a degree cap.
///
/// Each component moment follows the Gaussian recursion
///   m(a) = mu_i m(a - e_i) + sum_k S_ik (a - e_i)_k m(a - e_i - e_k),
/// taken on the first nonzero coordinate i of a. The table is immutable after
/// construction and safe to share between threads.
class MixtureMoments final : public MomentOracle {
 public:
  MixtureMoments(const GaussianMixture& gm, int max_degree);

  [[nodiscard]] int dim() const override { return dim_; }
  [[nodiscard]] int max_degree() const override { return max_degree_; }
  [[nodiscard]] double moment(const MultiIndex& alpha) const override;

  /// Moment of a single mixture component (unweighted).
  [[nodiscard]] double component_moment(std::size_t component, const MultiIndex& alpha) const;

 private:
  int dim_;
  int max_degree_;
  std::vector<double> weights_;
  std::map<MultiIndex, std::vector<double>> table_;  // per-component moments
};

}  // namespace sgmpc
