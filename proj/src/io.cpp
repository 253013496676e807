#include "sgmpc/io.hpp"

#include "sgmpc/error.hpp"

#include <cstdio>

namespace sgmpc {

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::kConfig, "field '" + field + "': " + what);
}

const Json& member(const Json& j, const char* key, const std::string& field) {
  if (!j.is_object()) bad(field, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) bad(field.empty() ? key : field + "." + key, "missing");
  return *it;
}

double number(const Json& j, const std::string& field) {
  if (!j.is_number()) bad(field, "expected a number");
  return j.get<double>();
}

int integer(const Json& j, const std::string& field) {
  if (!j.is_number_integer()) bad(field, "expected an integer");
  return j.get<int>();
}

}  // namespace

Json to_json(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

Json to_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::MatrixXd matrix_from_json(const Json& j, const std::string& field) {
  if (!j.is_array()) bad(field, "expected an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return Eigen::MatrixXd(0, 0);
  if (!j[0].is_array()) bad(field, "expected an array of rows");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Json& row = j[static_cast<std::size_t>(r)];
    const std::string rf = field + "[" + std::to_string(r) + "]";
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      bad(rf, "expected " + std::to_string(cols) + " entries");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = number(row[static_cast<std::size_t>(c)], rf + "[" + std::to_string(c) + "]");
    }
  }
  return m;
}

Eigen::VectorXd vector_from_json(const Json& j, const std::string& field) {
  if (!j.is_array()) bad(field, "expected an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = number(j[i], field + "[" + std::to_string(i) + "]");
  }
  return v;
}

Json basis_to_json(const OrthonormalBasis& basis) {
  Json order = Json::array();
  for (const auto& alpha : basis.order().indices()) order.push_back(alpha.exponents());
  Json j;
  j["d"] = basis.dim();
  j["p"] = basis.degree();
  j["order"] = std::move(order);
  j["coeffs"] = to_json(basis.coeffs());
  j["gram_residual"] = basis.gram_residual();
  j["fingerprint"] = basis.fingerprint();
  return j;
}

OrthonormalBasis basis_from_json(const Json& j) {
  const int d = integer(member(j, "d", ""), "d");
  const int p = integer(member(j, "p", ""), "p");
  if (d < 1 || p < 0) bad("d", "basis needs d >= 1 and p >= 0");
  MonomialOrder order = graded_lex_indices(d, p);
  const Json& listed = member(j, "order", "");
  if (!listed.is_array() || static_cast<int>(listed.size()) != order.size()) bad("order", "length does not match d, p");
  for (int k = 0; k < order.size(); ++k) {
    if (listed[static_cast<std::size_t>(k)] != Json(order[k].exponents())) {
      bad("order[" + std::to_string(k) + "]", "not in graded-lexicographic order");
    }
  }
  Eigen::MatrixXd coeffs = matrix_from_json(member(j, "coeffs", ""), "coeffs");
  if (coeffs.rows() != order.size() || coeffs.cols() != order.size()) bad("coeffs", "expected a square N x N matrix");
  const double residual = number(member(j, "gram_residual", ""), "gram_residual");
  OrthonormalBasis basis(std::move(order), std::move(coeffs), residual);
  if (j.contains("fingerprint") && j["fingerprint"] != basis.fingerprint()) bad("fingerprint", "does not match coeffs");
  return basis;
}

Json rule_to_json(const QuadratureRule& rule) {
  Json j;
  j["d"] = rule.dim();
  j["p"] = rule.p;
  j["nodes"] = to_json(rule.nodes);
  j["weights"] = to_json(rule.weights);
  j["residual"] = rule.residual;
  j["basis_id"] = rule.basis_id;
  j["negative_weights"] = rule.negative_weights;
  return j;
}

QuadratureRule rule_from_json(const Json& j) {
  QuadratureRule rule;
  const int d = integer(member(j, "d", ""), "d");
  rule.p = integer(member(j, "p", ""), "p");
  rule.nodes = matrix_from_json(member(j, "nodes", ""), "nodes");
  rule.weights = vector_from_json(member(j, "weights", ""), "weights");
  rule.residual = number(member(j, "residual", ""), "residual");
  if (rule.nodes.rows() != rule.weights.size()) bad("weights", "one weight per node required");
  if (rule.nodes.rows() > 0 && rule.nodes.cols() != d) bad("nodes", "rows must have d entries");
  if (j.contains("basis_id")) {
    if (!j["basis_id"].is_string()) bad("basis_id", "expected a string");
    rule.basis_id = j["basis_id"].get<std::string>();
  }
  rule.negative_weights = static_cast<int>((rule.weights.array() < 0.0).count());
  return rule;
}

Json galerkin_to_json(const GalerkinSystem& gs) {
  Json j;
  j["n_x"] = gs.n_x;
  j["n_u"] = gs.n_u;
  j["n_w"] = gs.n_w;
  j["n_basis"] = gs.n_basis;
  j["basis_id"] = gs.basis_id;
  j["A_hat"] = to_json(gs.A_hat);
  j["B_hat"] = to_json(gs.B_hat);
  j["D_hat"] = to_json(gs.D_hat);
  j["V"] = to_json(gs.V);
  return j;
}

GalerkinSystem galerkin_from_json(const Json& j) {
  GalerkinSystem gs;
  gs.n_x = integer(member(j, "n_x", ""), "n_x");
  gs.n_u = integer(member(j, "n_u", ""), "n_u");
  gs.n_w = integer(member(j, "n_w", ""), "n_w");
  gs.n_basis = integer(member(j, "n_basis", ""), "n_basis");
  gs.basis_id = member(j, "basis_id", "").get<std::string>();
  gs.A_hat = matrix_from_json(member(j, "A_hat", ""), "A_hat");
  gs.B_hat = matrix_from_json(member(j, "B_hat", ""), "B_hat");
  gs.D_hat = matrix_from_json(member(j, "D_hat", ""), "D_hat");
  gs.V = matrix_from_json(member(j, "V", ""), "V");
  const Eigen::Index nx = gs.n_x * gs.n_basis;
  if (gs.A_hat.rows() != nx || gs.A_hat.cols() != nx) bad("A_hat", "expected n_x * n_basis square");
  if (gs.B_hat.rows() != nx || gs.B_hat.cols() != gs.n_u * gs.n_basis) bad("B_hat", "shape mismatch");
  if (gs.n_w > 0 && (gs.D_hat.rows() != nx || gs.D_hat.cols() != gs.n_w * gs.n_basis)) bad("D_hat", "shape mismatch");
  if (gs.V.rows() != gs.n_basis || gs.V.cols() != gs.n_basis) bad("V", "expected n_basis square");
  return gs;
}

Json mixture_to_json(const GaussianMixture& gm) {
  Json out = Json::array();
  for (const auto& c : gm.components()) {
    Json e;
    e["weight"] = c.weight;
    e["mean"] = to_json(c.mean);
    e["cov"] = to_json(c.covariance);
    out.push_back(std::move(e));
  }
  return out;
}

GaussianMixture mixture_from_json(const Json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) bad(field, "expected a nonempty list of components");
  std::vector<MixtureComponent> comps;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string f = field + "[" + std::to_string(i) + "]";
    MixtureComponent c;
    c.weight = number(member(j[i], "weight", f), f + ".weight");
    c.mean = vector_from_json(member(j[i], "mean", f), f + ".mean");
    c.covariance = matrix_from_json(member(j[i], "cov", f), f + ".cov");
    comps.push_back(std::move(c));
  }
  try {
    return GaussianMixture(std::move(comps));
  } catch (const Error& e) {
    bad(field, e.what());
  }
}

PolyMatrix polymatrix_from_json(const Json& j, int dim, const std::string& field) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) bad(field, "expected an array of rows");
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j[0].size());
  PolyMatrix m(rows, cols, dim);
  for (int r = 0; r < rows; ++r) {
    const Json& row = j[static_cast<std::size_t>(r)];
    const std::string rf = field + "[" + std::to_string(r) + "]";
    if (!row.is_array() || static_cast<int>(row.size()) != cols) bad(rf, "expected " + std::to_string(cols) + " entries");
    for (int c = 0; c < cols; ++c) {
      const Json& e = row[static_cast<std::size_t>(c)];
      const std::string ef = rf + "[" + std::to_string(c) + "]";
      if (e.is_number()) {
        m(r, c) = Polynomial::constant(dim, e.get<double>());
        continue;
      }
      if (!e.is_array()) bad(ef, "expected a number or a list of {exponents, coeff} terms");
      Polynomial poly(dim);
      for (std::size_t t = 0; t < e.size(); ++t) {
        const std::string tf = ef + "[" + std::to_string(t) + "]";
        const Json& ex = member(e[t], "exponents", tf);
        if (!ex.is_array() || static_cast<int>(ex.size()) != dim) bad(tf + ".exponents", "expected d integers");
        std::vector<int> alpha;
        for (const auto& a : ex) {
          if (!a.is_number_integer() || a.get<int>() < 0) bad(tf + ".exponents", "expected nonnegative integers");
          alpha.push_back(a.get<int>());
        }
        poly.add_term(MultiIndex(std::move(alpha)), number(member(e[t], "coeff", tf), tf + ".coeff"));
      }
      m(r, c) = std::move(poly);
    }
  }
  return m;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace sgmpc
