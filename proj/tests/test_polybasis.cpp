#include "sgmpc/error.hpp"
#include "sgmpc/polybasis.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace sgmpc {
namespace {

using testing::bimodal_mixture;
using testing::max_abs;

TEST(MonomialOrder, TwoDimensionalDegreeOne) {
  const auto order = graded_lex_indices(2, 1);
  ASSERT_EQ(order.size(), 3);
  EXPECT_EQ(order[0], MultiIndex({0, 0}));
  EXPECT_EQ(order[1], MultiIndex({1, 0}));
  EXPECT_EQ(order[2], MultiIndex({0, 1}));
}

TEST(MonomialOrder, Sizes) {
  EXPECT_EQ(graded_lex_indices(2, 2).size(), 6);
  EXPECT_EQ(graded_lex_indices(3, 2).size(), 10);
  EXPECT_EQ(basis_size(2, 4), 15);
  EXPECT_EQ(basis_size(12, 2), 91);
  for (int d = 1; d <= 4; ++d) {
    for (int p = 0; p <= 5; ++p) EXPECT_EQ(graded_lex_indices(d, p).size(), basis_size(d, p));
  }
}

TEST(MonomialOrder, GradedThenLexDescending) {
  const auto order = graded_lex_indices(3, 4);
  EXPECT_EQ(order[0].degree(), 0);
  for (int k = 1; k < order.size(); ++k) {
    const auto& a = order[k - 1];
    const auto& b = order[k];
    ASSERT_TRUE(a.degree() < b.degree() || (a.degree() == b.degree() && a > b));
    EXPECT_EQ(order.find(b), k);
  }
  EXPECT_EQ(order.find(MultiIndex({5, 0, 0})), -1);
}

TEST(MonomialOrder, IncrementalMonomials) {
  const auto order = graded_lex_indices(2, 3);
  const double x[2] = {1.5, -0.7};
  std::vector<double> out(static_cast<std::size_t>(order.size()));
  order.monomials(x, out);
  for (int k = 0; k < order.size(); ++k) {
    EXPECT_NEAR(out[static_cast<std::size_t>(k)], std::pow(x[0], order[k][0]) * std::pow(x[1], order[k][1]), 1e-14);
  }
}

TEST(GramSchmidt, HermiteDegreeTwo) {
  const MixtureMoments m(GaussianMixture::standard_normal(1), 4);
  const auto basis = gram_schmidt(m, 1, 2);
  EXPECT_EQ(basis.coeffs()(0, 0), 1.0);
  EXPECT_NEAR(basis.coeffs()(1, 1), 1.0, 1e-15);
  EXPECT_NEAR(basis.coeffs()(2, 0), -1.0 / std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(basis.coeffs()(2, 1), 0.0, 1e-14);
  EXPECT_NEAR(basis.coeffs()(2, 2), 1.0 / std::sqrt(2.0), 1e-14);
  const Eigen::VectorXd at2 = basis.evaluate(Eigen::VectorXd::Constant(1, 2.0));
  EXPECT_NEAR(at2(0), 1.0, 0.0);
  EXPECT_NEAR(at2(1), 2.0, 1e-14);
  EXPECT_NEAR(at2(2), 3.0 / std::sqrt(2.0), 1e-14);
}

TEST(GramSchmidt, UniformMeasure) {
  const testing::UniformOracle oracle(2);
  const auto basis = gram_schmidt(oracle, 1, 1);
  EXPECT_NEAR(basis.coeffs()(1, 1), std::sqrt(3.0), 1e-14);
  EXPECT_NEAR(basis.coeffs()(1, 0), 0.0, 1e-15);
}

TEST(GramSchmidt, TensorHermiteAtOrigin) {
  const MixtureMoments m(GaussianMixture::standard_normal(2), 4);
  const auto basis = gram_schmidt(m, 2, 2);
  Eigen::VectorXd expected(6);
  expected << 1, 0, 0, -1 / std::sqrt(2.0), 0, -1 / std::sqrt(2.0);
  EXPECT_LT(max_abs(basis.evaluate(Eigen::Vector2d::Zero()) - expected), 1e-14);
}

TEST(GramSchmidt, FirstFunctionIsOne) {
  const MixtureMoments m(bimodal_mixture(), 6);
  const auto basis = gram_schmidt(m, 2, 3);
  EXPECT_EQ(basis.coeffs()(0, 0), 1.0);
  EXPECT_EQ(basis.coeffs().row(0).tail(basis.size() - 1).cwiseAbs().maxCoeff(), 0.0);
}

TEST(GramSchmidt, DegenerateMeasure) {
  // A point mass cannot carry a nonconstant orthonormal polynomial.
  const GaussianMixture point({{1.0, Eigen::VectorXd::Constant(1, 0.3), Eigen::MatrixXd::Zero(1, 1)}});
  const MixtureMoments m(point, 2);
  try {
    (void)gram_schmidt(m, 1, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateMeasure);
  }
}

TEST(GramSchmidt, OracleTooShallow) {
  const MixtureMoments m(bimodal_mixture(), 3);
  EXPECT_THROW((void)gram_schmidt(m, 2, 2), Error);
}

TEST(Basis, BatchMatchesPointwiseAndPermutes) {
  const MixtureMoments m(bimodal_mixture(), 6);
  const auto basis = gram_schmidt(m, 2, 3);
  const auto pts = sample(bimodal_mixture(), 5, 9).points;
  const Eigen::MatrixXd batch = basis.evaluate_batch(pts);
  for (int r = 0; r < 5; ++r) {
    EXPECT_LT(max_abs(batch.row(r).transpose() - basis.evaluate(pts.row(r).transpose())), 1e-15);
  }
  Eigen::MatrixXd swapped = pts;
  swapped.row(0).swap(swapped.row(3));
  const Eigen::MatrixXd b2 = basis.evaluate_batch(swapped);
  EXPECT_EQ(b2.row(0), batch.row(3));
  EXPECT_EQ(b2.row(3), batch.row(0));
  EXPECT_THROW((void)basis.evaluate(Eigen::VectorXd::Zero(3)), Error);
}

TEST(Basis, GradientMatchesFiniteDifferences) {
  const MixtureMoments m(bimodal_mixture(), 8);
  const auto basis = gram_schmidt(m, 2, 4);
  const Eigen::Vector2d x(0.3, -1.1);
  const Eigen::MatrixXd g = basis.gradient(x);
  const double h = 1e-6;
  for (int i = 0; i < 2; ++i) {
    Eigen::Vector2d e = Eigen::Vector2d::Zero();
    e(i) = h;
    const Eigen::VectorXd fd = (basis.evaluate(x + e) - basis.evaluate(x - e)) / (2 * h);
    EXPECT_LT(max_abs(fd - g.col(i)), 1e-6);
  }
}

TEST(BasisProperty, AnalyticOrthonormalityAndTriangularity) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 6; ++trial) {
    const int dim = 1 + trial % 3;
    const int p = 1 + trial % 3;
    const auto gm = testing::random_mixture(rng, dim, 2);
    const MixtureMoments m(gm, 2 * p);
    const auto basis = gram_schmidt(m, dim, p);
    const Eigen::MatrixXd gram = basis.coeffs() * moment_gram_matrix(m, basis.order()) * basis.coeffs().transpose();
    EXPECT_LE(max_abs(gram - Eigen::MatrixXd::Identity(basis.size(), basis.size())), 1e-8);
    EXPECT_LE(basis.gram_residual(), 1e-8);
    for (int k = 0; k < basis.size(); ++k) {
      for (int j = k + 1; j < basis.size(); ++j) EXPECT_EQ(basis.coeffs()(k, j), 0.0);
    }
  }
}

TEST(BasisProperty, PolynomialRoundTrip) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const auto gm = bimodal_mixture();
  const MixtureMoments m(gm, 6);
  const auto basis = gram_schmidt(m, 2, 3);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd mono(basis.size());
    for (int k = 0; k < mono.size(); ++k) mono(k) = u(rng);
    const Eigen::VectorXd back = basis.to_monomials(basis.project_monomials(m, mono));
    EXPECT_LT(max_abs(back - mono), 1e-10);
  }
}

TEST(BasisProperty, EmpiricalGramWithinStandardErrors) {
  const auto gm = bimodal_mixture();
  const MixtureMoments m(gm, 4);
  const auto basis = gram_schmidt(m, 2, 2);
  const auto pts = sample(gm, 1000000, 77).points;
  const Eigen::MatrixXd phi = basis.evaluate_batch(pts);
  const double n = static_cast<double>(pts.rows());
  for (int i = 0; i < basis.size(); ++i) {
    for (int j = i; j < basis.size(); ++j) {
      const Eigen::ArrayXd prod = phi.col(i).array() * phi.col(j).array();
      const double mean = prod.mean();
      const double se = std::sqrt((prod - mean).square().sum() / (n - 1) / n);
      EXPECT_NEAR(mean, i == j ? 1.0 : 0.0, 5.0 * se + 1e-15) << i << "," << j;
    }
  }
}

TEST(Basis, FingerprintIsStable) {
  const MixtureMoments m(bimodal_mixture(), 4);
  const auto a = gram_schmidt(m, 2, 2);
  const auto b = gram_schmidt(m, 2, 2);
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
  EXPECT_EQ(a.fingerprint().substr(0, 5), "d2p2-");
  const MixtureMoments sn(GaussianMixture::standard_normal(2), 4);
  EXPECT_NE(gram_schmidt(sn, 2, 2).fingerprint(), a.fingerprint());
}

}  // namespace
}  // namespace sgmpc
