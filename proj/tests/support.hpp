#pragma once

#include "sgmpc/uncertainty.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

namespace sgmpc::testing {

/// Same measure as the shipped obstacle default.
inline GaussianMixture bimodal_mixture() {
  Eigen::MatrixXd c1(2, 2), c2(2, 2);
  c1 << 1.0, 0.4, 0.4, 1.0;
  c2 << 0.8, -0.3, -0.3, 0.8;
  return GaussianMixture({{0.5, Eigen::Vector2d(-0.5, -0.5), 0.5 * c1}, {0.5, Eigen::Vector2d(0.75, 0.75), 0.5 * c2}});
}

/// Random mixture with bounded means and well-conditioned covariances.
inline GaussianMixture random_mixture(std::mt19937_64& rng, int dim, int components) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<MixtureComponent> comps;
  double total = 0.0;
  std::vector<double> w(static_cast<std::size_t>(components));
  for (auto& x : w) {
    x = 0.2 + std::abs(u(rng));
    total += x;
  }
  for (int j = 0; j < components; ++j) {
    Eigen::VectorXd mean(dim);
    Eigen::MatrixXd f(dim, dim);
    for (int i = 0; i < dim; ++i) mean(i) = u(rng);
    for (int i = 0; i < dim * dim; ++i) f(i) = 0.5 * u(rng);
    Eigen::MatrixXd cov = f * f.transpose() + 0.2 * Eigen::MatrixXd::Identity(dim, dim);
    comps.push_back({w[static_cast<std::size_t>(j)] / total, mean, cov});
  }
  return GaussianMixture(std::move(comps));
}

/// Moments of the uniform distribution on [-1, 1].
class UniformOracle final : public MomentOracle {
 public:
  explicit UniformOracle(int max_degree) : max_degree_(max_degree) {}
  [[nodiscard]] int dim() const override { return 1; }
  [[nodiscard]] int max_degree() const override { return max_degree_; }
  [[nodiscard]] double moment(const MultiIndex& alpha) const override {
    const int k = alpha[0];
    return k % 2 == 1 ? 0.0 : 1.0 / (k + 1);
  }

 private:
  int max_degree_;
};

inline double max_abs(const Eigen::MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace sgmpc::testing
