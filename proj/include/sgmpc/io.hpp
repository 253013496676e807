#pragma once

#include "sgmpc/galerkin.hpp"
#include "sgmpc/polybasis.hpp"
#include "sgmpc/quadgen.hpp"
#include "sgmpc/uncertainty.hpp"

#include <json.hpp>

#include <Eigen/Dense>
#include <string>

namespace sgmpc {

using Json = nlohmann::ordered_json;

/// Row-major nested arrays. A column vector is a flat array.
Json to_json(const Eigen::MatrixXd& m);
Json to_json(const Eigen::VectorXd& v);
/// Throws Error(kConfig) naming `field` on shape or type problems.
Eigen::MatrixXd matrix_from_json(const Json& j, const std::string& field);
Eigen::VectorXd vector_from_json(const Json& j, const std::string& field);

/// {d, p, order, coeffs, gram_residual, fingerprint}
Json basis_to_json(const OrthonormalBasis& basis);
OrthonormalBasis basis_from_json(const Json& j);

/// {d, p, nodes, weights, residual, basis_id, negative_weights}
Json rule_to_json(const QuadratureRule& rule);
QuadratureRule rule_from_json(const Json& j);

/// {n_x, n_u, n_w, n_basis, basis_id, A_hat, B_hat, D_hat, V}
Json galerkin_to_json(const GalerkinSystem& gs);
GalerkinSystem galerkin_from_json(const Json& j);

/// List of {weight, mean, cov}.
Json mixture_to_json(const GaussianMixture& gm);
GaussianMixture mixture_from_json(const Json& j, const std::string& field);

/// Entries are numbers or lists of {exponents, coeff} terms.
PolyMatrix polymatrix_from_json(const Json& j, int dim, const std::string& field);

/// Compact dump with a trailing newline.
std::string dump(const Json& j);

/// printf %.17g
std::string format_double(double v);

}  // namespace sgmpc
