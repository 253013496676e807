#include "sgmpc/config.hpp"

#include "sgmpc/error.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace sgmpc {

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::kConfig, "field '" + field + "': " + what);
}

/// Object view that records which keys were read and rejects the rest.
class Obj {
 public:
  Obj(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
  }

  [[nodiscard]] std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) {
    used_.insert(key);
    return j_.contains(key);
  }

  const Json& raw(const std::string& key) {
    if (!has(key)) fail(field(key), "missing");
    return j_.at(key);
  }

  std::optional<double> opt_num(const std::string& key) {
    if (!has(key)) return std::nullopt;
    const Json& v = j_.at(key);
    if (!v.is_number()) fail(field(key), "expected a number");
    return v.get<double>();
  }

  double num(const std::string& key, double fallback) { return opt_num(key).value_or(fallback); }

  std::optional<long long> opt_int(const std::string& key) {
    if (!has(key)) return std::nullopt;
    const Json& v = j_.at(key);
    if (!v.is_number_integer()) fail(field(key), "expected an integer");
    return v.get<long long>();
  }

  int integer(const std::string& key, int fallback) {
    return static_cast<int>(opt_int(key).value_or(fallback));
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const Json& v = j_.at(key);
    if (!v.is_boolean()) fail(field(key), "expected true or false");
    return v.get<bool>();
  }

  std::optional<std::string> opt_str(const std::string& key) {
    if (!has(key)) return std::nullopt;
    const Json& v = j_.at(key);
    if (!v.is_string()) fail(field(key), "expected a string");
    return v.get<std::string>();
  }

  std::optional<Eigen::MatrixXd> opt_matrix(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return matrix_from_json(j_.at(key), field(key));
  }

  std::optional<Eigen::VectorXd> opt_vector(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return vector_from_json(j_.at(key), field(key));
  }

  Obj child(const std::string& key) { return Obj(raw(key), field(key)); }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) fail(field(key), "unknown key");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> used_;
};

std::uint64_t seed_value(Obj& o, const std::string& key, std::uint64_t fallback) {
  const auto v = o.opt_int(key);
  if (!v) return fallback;
  if (*v < 0) fail(o.field(key), "seeds are nonnegative");
  return static_cast<std::uint64_t>(*v);
}

int positive(Obj& o, const std::string& key, int fallback, int minimum) {
  const int v = o.integer(key, fallback);
  if (v < minimum) fail(o.field(key), "must be >= " + std::to_string(minimum));
  return v;
}

DiscretizationMethod method_from(const std::string& s, const std::string& field) {
  if (s == "zoh") return DiscretizationMethod::kZeroOrderHold;
  if (s == "euler") return DiscretizationMethod::kEuler;
  fail(field, "expected \"zoh\" or \"euler\"");
}

QuadConfig parse_quad(Obj o, std::uint64_t seed) {
  QuadConfig q;
  q.m_init = o.integer("m_init", q.m_init);
  q.exactness_tol = o.num("exactness_tol", q.exactness_tol);
  q.bcd_max_iters = positive(o, "bcd_max_iters", q.bcd_max_iters, 1);
  q.inner_ls_tol = o.num("inner_ls_tol", q.inner_ls_tol);
  q.reduction_enabled = o.boolean("reduction", q.reduction_enabled);
  q.polish = o.boolean("polish", q.polish);
  q.stall_window = positive(o, "stall_window", q.stall_window, 1);
  if (q.m_init < 0) fail(o.field("m_init"), "must be >= 0");
  if (!(q.exactness_tol > 0.0)) fail(o.field("exactness_tol"), "must be positive");
  q.seed = seed;
  o.finish();
  return q;
}

SolverConfig parse_solver(Obj o) {
  SolverConfig s;
  s.max_outer = positive(o, "max_outer", s.max_outer, 1);
  s.max_inner = positive(o, "max_inner", s.max_inner, 1);
  s.feas_tol = o.num("feas_tol", s.feas_tol);
  s.opt_tol = o.num("opt_tol", s.opt_tol);
  s.rho0 = o.num("rho0", s.rho0);
  s.rho_growth = o.num("rho_growth", s.rho_growth);
  s.rho_max = o.num("rho_max", s.rho_max);
  s.eps_smooth = o.num("eps_smooth", s.eps_smooth);
  if (!(s.feas_tol > 0.0)) fail(o.field("feas_tol"), "must be positive");
  if (!(s.rho0 > 0.0)) fail(o.field("rho0"), "must be positive");
  if (!(s.rho_growth > 1.0)) fail(o.field("rho_growth"), "must exceed 1");
  o.finish();
  return s;
}

struct Common {
  std::optional<double> beta;
  std::optional<int> horizon;
  std::optional<int> steps;
  std::optional<GaussianMixture> mixture;
};

Scenario build_obstacle(Obj o, const Common& c) {
  ObstacleParams p;
  p.rho1 = o.num("rho1", p.rho1);
  p.rho2 = o.num("rho2", p.rho2);
  p.deterministic = o.boolean("deterministic", p.deterministic);
  p.offset = o.num("offset", p.offset);
  p.u_max = o.num("u_max", p.u_max);
  if (!(p.u_max > 0.0)) fail(o.field("u_max"), "must be positive");
  o.finish();
  p.horizon = c.horizon.value_or(p.horizon);
  p.beta = c.beta.value_or(p.beta);
  p.mixture = c.mixture;
  return scenario_obstacle(p);
}

Scenario build_vehicle(Obj o, const Common& c) {
  VehicleParams p;
  p.vx = o.num("vx", p.vx);
  p.mass = o.num("mass", p.mass);
  p.a = o.num("a", p.a);
  p.b = o.num("b", p.b);
  p.izz = o.num("izz", p.izz);
  p.stiffness_per_deg = o.num("stiffness_per_deg", p.stiffness_per_deg);
  p.spread = o.num("spread", p.spread);
  p.dt = o.num("dt", p.dt);
  if (auto m = o.opt_str("discretization")) p.method = method_from(*m, o.field("discretization"));
  p.delta_max = o.num("delta_max", p.delta_max);
  p.e1_0 = o.num("e1_0", p.e1_0);
  for (const char* k : {"vx", "mass", "a", "b", "izz", "stiffness_per_deg", "dt", "delta_max"}) {
    if (o.has(k) && !(o.raw(k).get<double>() > 0.0)) fail(o.field(k), "must be positive");
  }
  o.finish();
  p.horizon = c.horizon.value_or(p.horizon);
  p.steps = c.steps.value_or(p.steps);
  p.beta = c.beta.value_or(p.beta);
  p.mixture = c.mixture;
  return scenario_vehicle(p);
}

Scenario build_quadrotor(Obj o, const Common& c) {
  QuadrotorParams p;
  p.A_c = o.opt_matrix("A_c");
  p.B_c = o.opt_matrix("B_c");
  p.D = o.opt_matrix("D");
  p.dt = o.num("dt", p.dt);
  p.u_eq = o.num("u_eq", p.u_eq);
  p.du_max = o.num("du_max", p.du_max);
  p.sigma = o.num("sigma", p.sigma);
  p.attitude_max = o.num("attitude_max", p.attitude_max);
  p.reference = o.opt_str("reference").value_or(p.reference);
  p.q_weight = o.num("q_weight", p.q_weight);
  p.s_weight = o.num("s_weight", p.s_weight);
  p.r_weight = o.num("r_weight", p.r_weight);
  if (p.reference != "helix" && p.reference != "step") fail(o.field("reference"), "expected \"helix\" or \"step\"");
  if (!p.A_c) fail(o.field("A_c"), "quadrotor model matrices are required");
  if (!p.B_c) fail(o.field("B_c"), "quadrotor model matrices are required");
  o.finish();
  p.horizon = c.horizon.value_or(p.horizon);
  p.steps = c.steps.value_or(p.steps);
  p.beta = c.beta.value_or(p.beta);
  p.mixture = c.mixture;
  return scenario_quadrotor(p);
}

AffineConstraint parse_constraint(Obj o, const Common& c) {
  AffineConstraint con;
  con.a = vector_from_json(o.raw("a"), o.field("a"));
  con.b = o.num("b", 0.0);
  con.beta = o.num("beta", c.beta.value_or(0.99));
  if (o.has("active_times")) {
    const Json& at = o.raw("active_times");
    if (!at.is_array()) fail(o.field("active_times"), "expected a list of steps");
    for (const auto& t : at) {
      if (!t.is_number_integer() || t.get<int>() < 1) fail(o.field("active_times"), "steps are integers >= 1");
      con.active_times.push_back(t.get<int>());
    }
  }
  con.name = o.opt_str("name").value_or("");
  o.finish();
  return con;
}

Scenario build_custom(Obj o, const Common& c) {
  if (!c.mixture) fail("mixture", "required for a custom scenario");
  if (!c.horizon) fail("horizon", "required for a custom scenario");
  Scenario sc;
  sc.name = o.opt_str("name").value_or("custom");
  sc.mixture = *c.mixture;
  const int d = sc.mixture.dim();
  {
    Obj s = o.child("system");
    sc.system.A = polymatrix_from_json(s.raw("A"), d, s.field("A"));
    sc.system.B = polymatrix_from_json(s.raw("B"), d, s.field("B"));
    sc.system.D = s.has("D") ? polymatrix_from_json(s.raw("D"), d, s.field("D")) : PolyMatrix(sc.system.A.rows(), 0, d);
    s.finish();
  }
  const int nx = sc.system.A.rows();
  const int nu = sc.system.B.cols();
  if (o.has("discretization")) {
    Obj dz = o.child("discretization");
    Discretization disc;
    disc.method = method_from(dz.opt_str("method").value_or("zoh"), dz.field("method"));
    disc.dt = dz.num("dt", disc.dt);
    if (!(disc.dt > 0.0)) fail(dz.field("dt"), "must be positive");
    dz.finish();
    sc.discretization = disc;
  }
  sc.x0 = o.opt_vector("x0").value_or(Eigen::VectorXd::Zero(nx));
  MpcProblem& prob = sc.problem;
  prob.T = *c.horizon;
  prob.Q = o.opt_matrix("Q").value_or(Eigen::MatrixXd::Identity(nx, nx));
  prob.R = o.opt_matrix("R").value_or(Eigen::MatrixXd::Identity(nu, nu));
  prob.u_lower = o.opt_vector("u_lower").value_or(Eigen::VectorXd());
  prob.u_upper = o.opt_vector("u_upper").value_or(Eigen::VectorXd());
  if (o.has("constraints")) {
    const Json& list = o.raw("constraints");
    if (!list.is_array()) fail(o.field("constraints"), "expected a list");
    for (std::size_t i = 0; i < list.size(); ++i) {
      prob.constraints.push_back(parse_constraint(Obj(list[i], o.field("constraints") + "[" + std::to_string(i) + "]"), c));
    }
  }
  if (o.has("disturbance")) {
    Obj w = o.child("disturbance");
    const Eigen::VectorXd offset = w.opt_vector("offset").value_or(Eigen::VectorXd::Zero(sc.system.n_w()));
    const Eigen::MatrixXd gain = w.opt_matrix("gain").value_or(Eigen::MatrixXd::Zero(sc.system.n_w(), d));
    w.finish();
    if (offset.size() != sc.system.n_w() || gain.rows() != sc.system.n_w() || gain.cols() != d) {
      fail(o.field("disturbance"), "expects offset (n_w) and gain (n_w x d)");
    }
    sc.disturbance = [offset, gain](const Eigen::VectorXd& xi) -> Eigen::VectorXd { return offset + gain * xi; };
  }
  o.finish();
  return sc;
}

}  // namespace

Json read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return Json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kConfig, path + ": " + e.what());
  }
}

void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(ErrorCode::kConfig, "override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw Error(ErrorCode::kConfig, "override key '" + key + "' has an empty component");
    if (node->is_null()) *node = Json::object();
    if (!node->is_object()) throw Error(ErrorCode::kConfig, "override key '" + key + "' descends into a non-object");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  try {
    *node = Json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    *node = text;
  }
}

LoadedConfig parse_config(const Json& doc) {
  Obj root(doc, "");
  RunConfig rc;
  const auto name = root.opt_str("scenario");
  if (!name) fail("scenario", "missing");
  rc.scenario = *name;

  rc.pipeline.p = positive(root, "p", 2, 1);
  Common common;
  common.beta = root.opt_num("beta");
  if (common.beta && !(*common.beta > 0.5 && *common.beta < 1.0)) fail("beta", "must satisfy 0.5 < beta < 1");
  if (root.has("horizon")) common.horizon = positive(root, "horizon", 1, 1);
  if (root.has("steps")) common.steps = positive(root, "steps", 1, 1);
  std::optional<RunMode> mode;
  if (const auto m = root.opt_str("mode")) {
    if (*m == "open-loop") {
      mode = RunMode::kOpenLoop;
    } else if (*m == "receding") {
      mode = RunMode::kReceding;
    } else {
      fail("mode", "expected \"open-loop\" or \"receding\"");
    }
  }
  if (root.has("seeds")) {
    Obj s = root.child("seeds");
    rc.quad_seed = seed_value(s, "quadrature", rc.quad_seed);
    rc.mc_seed = seed_value(s, "mc", rc.mc_seed);
    s.finish();
  }
  rc.mc_samples = positive(root, "mc_samples", rc.mc_samples, 2);
  rc.report_step = root.integer("report_step", -1);
  rc.output_dir = root.opt_str("output_dir").value_or("");
  rc.pipeline.quad = root.has("quadrature") ? parse_quad(root.child("quadrature"), rc.quad_seed)
                                            : parse_quad(Obj(Json::object(), "quadrature"), rc.quad_seed);
  if (root.has("solver")) rc.pipeline.solver = parse_solver(root.child("solver"));
  if (root.has("mixture")) common.mixture = mixture_from_json(root.raw("mixture"), "mixture");

  const Json empty = Json::object();
  const Json& params_json = root.has("params") ? root.raw("params") : empty;
  Obj params(params_json, "params");

  Scenario sc;
  try {
    if (rc.scenario == "obstacle") {
      sc = build_obstacle(std::move(params), common);
    } else if (rc.scenario == "vehicle") {
      sc = build_vehicle(std::move(params), common);
    } else if (rc.scenario == "quadrotor") {
      sc = build_quadrotor(std::move(params), common);
    } else if (rc.scenario == "custom") {
      sc = build_custom(std::move(params), common);
    } else {
      fail("scenario", "unknown scenario '" + rc.scenario + "' (obstacle, vehicle, quadrotor, custom)");
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig) throw;
    throw Error(ErrorCode::kConfig, std::string("scenario '") + rc.scenario + "': " + e.what());
  }
  root.finish();

  if (mode) sc.mode = *mode;
  if (sc.mode == RunMode::kReceding && sc.closed_loop_steps < 1) sc.closed_loop_steps = common.steps.value_or(sc.problem.T);
  if (common.steps) sc.closed_loop_steps = *common.steps;
  if (rc.report_step > sc.problem.T) fail("report_step", "exceeds the horizon");
  if (rc.report_step < 0) rc.report_step = sc.problem.T;

  try {
    sc.validate();
    for (const auto& con : sc.problem.constraints) con.validate(sc.n_x());
    sc.problem.x_init = CoeffVector::deterministic(sc.x0, 1);
    sc.problem.validate(sc.n_x(), sc.n_u(), 1);
    sc.problem.x_init = CoeffVector();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig) throw;
    throw Error(ErrorCode::kConfig, std::string("scenario '") + rc.scenario + "': " + e.what());
  }
  return LoadedConfig{std::move(rc), std::move(sc), doc};
}

LoadedConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  Json doc = read_config_file(path);
  for (const auto& o : overrides) apply_override(doc, o);
  return parse_config(doc);
}

}  // namespace sgmpc
