#include "sgmpc/config.hpp"
#include "sgmpc/error.hpp"
#include "sgmpc/io.hpp"
#include "sgmpc/pipeline.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace sgmpc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitQuadrature = 2;
constexpr int kExitInfeasible = 3;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInfeasible:
      return kExitInfeasible;
    case ErrorCode::kDegreeOverflow:
    case ErrorCode::kDegenerateMeasure:
    case ErrorCode::kToleranceNotMet:
    case ErrorCode::kStalled:
    case ErrorCode::kTooFewNodes:
    case ErrorCode::kNoExactRuleFound:
      return kExitQuadrature;
    default:
      return kExitConfig;
  }
}

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("config", c.config, "Scenario config file (JSON)")->required();
  cmd->add_option("--set", c.overrides, "Override a config value, e.g. --set params.offset=30")->take_all();
  cmd->add_option("-o,--out", c.out, "Output directory");
}

fs::path output_dir(const Common& c, const RunConfig& rc) {
  fs::path dir;
  if (!c.out.empty()) {
    dir = c.out;
  } else if (!rc.output_dir.empty()) {
    dir = rc.output_dir;
  } else if (const char* env = std::getenv("SGMPC_OUTPUT_DIR"); env != nullptr && *env != '\0') {
    dir = env;
  } else {
    dir = ".";
  }
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kConfig, "cannot write '" + path.string() + "'");
  out << text;
}

std::vector<std::string> state_names(const Scenario& sc) {
  if (static_cast<int>(sc.state_names.size()) == sc.n_x()) return sc.state_names;
  std::vector<std::string> names;
  for (int i = 0; i < sc.n_x(); ++i) names.push_back("x" + std::to_string(i + 1));
  return names;
}

std::string trajectory_csv(const Scenario& sc, const std::vector<CoeffVector>& states, const Eigen::MatrixXd& inputs) {
  const auto names = state_names(sc);
  std::string s = "t";
  for (const auto& n : names) s += ",mean_" + n;
  for (const auto& n : names) s += ",std_" + n;
  for (int j = 0; j < sc.n_u(); ++j) s += ",u" + std::to_string(j + 1);
  s += "\n";
  for (std::size_t t = 0; t < states.size(); ++t) {
    const MeanVar mv = mean_var(states[t]);
    s += std::to_string(t);
    for (Eigen::Index i = 0; i < mv.mean.size(); ++i) s += "," + format_double(mv.mean(i));
    for (Eigen::Index i = 0; i < mv.var.size(); ++i) s += "," + format_double(std::sqrt(mv.var(i)));
    for (int j = 0; j < sc.n_u(); ++j) {
      s += ",";
      if (static_cast<Eigen::Index>(t) < inputs.rows()) s += format_double(inputs(static_cast<Eigen::Index>(t), j));
    }
    s += "\n";
  }
  return s;
}

std::string mc_csv(const Scenario& sc, const McReport& r) {
  const auto names = state_names(sc);
  std::string s = "t";
  for (const auto& n : names) s += ",mean_" + n;
  for (const auto& n : names) s += ",std_" + n;
  s += "\n";
  for (Eigen::Index t = 0; t < r.mean.rows(); ++t) {
    s += std::to_string(t);
    for (Eigen::Index i = 0; i < r.mean.cols(); ++i) s += "," + format_double(r.mean(t, i));
    for (Eigen::Index i = 0; i < r.std.cols(); ++i) s += "," + format_double(r.std(t, i));
    s += "\n";
  }
  return s;
}

Json timing_json(const PipelineTimings& tm) {
  Json j;
  j["basis_s"] = tm.basis_s;
  j["quadrature_s"] = tm.quadrature_s;
  j["projection_s"] = tm.projection_s;
  j["conversion_s"] = tm.conversion_s;
  j["solve_s"] = tm.solve_s;
  j["total_s"] = tm.total_s();
  return j;
}

Json solution_json(const Scenario& sc, const PipelineResult& res) {
  Json stats;
  int outer = 0;
  int inner = 0;
  double max_violation = 0.0;
  double max_margin = -std::numeric_limits<double>::infinity();
  for (const auto& s : res.solutions) {
    outer += s.stats.outer_iterations;
    inner += s.stats.inner_iterations;
    max_violation = std::max(max_violation, s.stats.max_violation);
    for (double m : s.margins) max_margin = std::max(max_margin, m);
  }
  stats["solves"] = res.solutions.size();
  stats["outer_iterations"] = outer;
  stats["inner_iterations"] = inner;
  stats["max_violation"] = max_violation;
  Json j;
  j["scenario"] = sc.name;
  j["mode"] = sc.mode == RunMode::kOpenLoop ? "open-loop" : "receding";
  j["status"] = to_string(res.status);
  j["objective"] = res.solutions.empty() ? 0.0 : res.solutions.front().objective;
  j["p"] = res.basis.degree();
  j["basis_size"] = res.basis.size();
  j["quadrature_nodes"] = res.rule.size();
  j["quadrature_residual"] = res.rule.residual;
  j["max_margin"] = std::isfinite(max_margin) ? Json(max_margin) : Json(nullptr);
  j["stats"] = std::move(stats);
  j["inputs"] = to_json(res.inputs);
  return j;
}

int cmd_run(const Common& c) {
  const LoadedConfig cfg = load_config(c.config, c.overrides);
  const fs::path dir = output_dir(c, cfg.run);
  const PipelineResult res = run_pipeline(cfg.scenario, cfg.run.pipeline);
  write_text(dir / "trajectory.csv", trajectory_csv(cfg.scenario, res.states, res.inputs));
  write_text(dir / "solution.json", dump(solution_json(cfg.scenario, res)));
  write_text(dir / "timing.json", dump(timing_json(res.timings)));
  std::cout << "run " << cfg.scenario.name << ": status " << to_string(res.status) << ", " << res.states.size()
            << " trajectory rows, outputs in " << dir.string() << "\n";
  if (res.status == SolveStatus::kInfeasible) {
    std::cerr << "sgmpc: solver reports the problem infeasible\n";
    return kExitInfeasible;
  }
  return kExitOk;
}

int cmd_compare_mc(const Common& c, int n, int oracle_n, bool dump_samples) {
  LoadedConfig cfg = load_config(c.config, c.overrides);
  if (n < 0) n = cfg.run.mc_samples;
  if (n < 2) throw Error(ErrorCode::kConfig, "field 'n': Monte Carlo MPC needs at least 2 samples");
  if (oracle_n < 2) throw Error(ErrorCode::kConfig, "field 'oracle-samples': needs at least 2 samples");
  Scenario& sc = cfg.scenario;
  sc.mode = RunMode::kOpenLoop;
  const fs::path dir = output_dir(c, cfg.run);
  const int step = cfg.run.report_step;

  const PipelineResult gal = run_pipeline(sc, cfg.run.pipeline);
  const McMpcResult mc = mc_mpc(sc, n, cfg.run.mc_seed, cfg.run.pipeline.solver);

  // Fixed Galerkin input on the true system vs the surrogate at the report step.
  const McReport truth = mc_propagate(sc, gal.inputs, oracle_n, McOptions{cfg.run.mc_seed + 1, step});
  const SampleBatch batch = sample(sc.mixture, static_cast<std::size_t>(oracle_n), cfg.run.mc_seed + 2);
  const Eigen::MatrixXd sur = sample_surrogate(gal.states[static_cast<std::size_t>(step)], gal.basis, batch.points);
  const auto names = state_names(sc);
  Json ks;
  for (int i = 0; i < sc.n_x(); ++i) {
    const Eigen::VectorXd a = sur.col(i);
    const Eigen::VectorXd b = truth.snapshot->col(i);
    const double scale = std::max({1.0, a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()});
    ks[names[static_cast<std::size_t>(i)]] =
        compare_pdf(std::vector<double>(a.data(), a.data() + a.size()), std::vector<double>(b.data(), b.data() + b.size()),
                    1e-9 * scale);
  }
  auto rates = [](const McReport& r) {
    Json j = Json::object();
    for (std::size_t k = 0; k < r.violation_rate.size(); ++k) {
      const std::string key = r.constraint_names[k].empty() ? "c" + std::to_string(k + 1) : r.constraint_names[k];
      j[key] = r.violation_rate[k];
    }
    return j;
  };

  Json out;
  out["scenario"] = sc.name;
  out["n_samples"] = n;
  out["oracle_samples"] = oracle_n;
  out["report_step"] = step;
  out["input_difference_norm"] = (gal.inputs - mc.solution.u_star).norm();
  out["ks_distance"] = std::move(ks);
  Json g;
  g["status"] = to_string(gal.status);
  g["objective"] = gal.solutions.front().objective;
  g["inputs"] = to_json(gal.inputs);
  g["violation_rate"] = rates(truth);
  out["galerkin"] = std::move(g);
  Json m;
  m["status"] = to_string(mc.solution.status);
  m["objective"] = mc.solution.objective;
  m["inputs"] = to_json(mc.solution.u_star);
  m["violation_rate"] = rates(mc.report);
  out["mc_mpc"] = std::move(m);
  Json tm;
  tm["galerkin_s"] = gal.timings.total_s();
  tm["mc_mpc_s"] = mc.report.wall_time_s;
  tm["speed_ratio"] = mc.report.wall_time_s / gal.timings.total_s();
  out["timing"] = std::move(tm);
  write_text(dir / "comparison.json", dump(out));
  write_text(dir / "mc_trajectory.csv", mc_csv(sc, truth));
  write_text(dir / "trajectory.csv", trajectory_csv(sc, gal.states, gal.inputs));
  if (dump_samples) {
    std::string s;
    for (const auto& nm : names) s += (s.empty() ? "" : ",") + std::string("surrogate_") + nm;
    for (const auto& nm : names) s += ",mc_" + nm;
    s += "\n";
    for (Eigen::Index r = 0; r < sur.rows(); ++r) {
      for (Eigen::Index i = 0; i < sur.cols(); ++i) s += (i ? "," : "") + format_double(sur(r, i));
      for (Eigen::Index i = 0; i < sur.cols(); ++i) s += "," + format_double((*truth.snapshot)(r, i));
      s += "\n";
    }
    write_text(dir / "samples.csv", s);
  }
  std::cout << "compare-mc " << sc.name << ": speed ratio " << mc.report.wall_time_s / gal.timings.total_s()
            << ", outputs in " << dir.string() << "\n";
  if (gal.status == SolveStatus::kInfeasible || mc.solution.status == SolveStatus::kInfeasible) {
    std::cerr << "sgmpc: solver reports the problem infeasible\n";
    return kExitInfeasible;
  }
  return kExitOk;
}

enum class Emit { kBasis, kQuadrature, kGalerkin };

int cmd_emit(const Common& c, Emit what) {
  const LoadedConfig cfg = load_config(c.config, c.overrides);
  const fs::path dir = output_dir(c, cfg.run);
  const Scenario& sc = cfg.scenario;
  const int p = cfg.run.pipeline.p;
  const OrthonormalBasis basis = build_basis(sc.mixture, p);
  if (what == Emit::kBasis) {
    write_text(dir / "basis.json", dump(basis_to_json(basis)));
    std::cout << "wrote " << (dir / "basis.json").string() << "\n";
    return kExitOk;
  }
  const QuadratureRule rule = build_rule(sc.mixture, p, cfg.run.pipeline.quad);
  if (what == Emit::kQuadrature) {
    write_text(dir / "quadrature.json", dump(rule_to_json(rule)));
    std::cout << "wrote " << (dir / "quadrature.json").string() << "\n";
    return kExitOk;
  }
  write_text(dir / "galerkin.json", dump(galerkin_to_json(project_scenario(sc, basis, rule))));
  std::cout << "wrote " << (dir / "galerkin.json").string() << "\n";
  return kExitOk;
}

int cmd_validate(const Common& c) {
  const LoadedConfig cfg = load_config(c.config, c.overrides);
  const Scenario& sc = cfg.scenario;
  std::cout << "config ok: scenario " << sc.name << ", n_x " << sc.n_x() << ", n_u " << sc.n_u() << ", d "
            << sc.mixture.dim() << ", T " << sc.problem.T << ", p " << cfg.run.pipeline.p << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chance-constrained stochastic MPC with Galerkin surrogates"};
  app.require_subcommand(1);

  Common run_opts, cmp_opts, basis_opts, quad_opts, gal_opts, val_opts;
  int n_samples = -1;
  int oracle_samples = 100000;
  bool dump_samples = false;

  auto* run = app.add_subcommand("run", "Basis, quadrature, projection, conversion and solve; writes trajectory.csv, "
                                        "solution.json and timing.json");
  add_common(run, run_opts);
  auto* cmp = app.add_subcommand("compare-mc", "Galerkin pipeline vs sample-average Monte Carlo MPC; writes "
                                               "comparison.json");
  add_common(cmp, cmp_opts);
  cmp->add_option("-n,--samples", n_samples, "Monte Carlo MPC samples (default: config mc_samples)");
  cmp->add_option("--oracle-samples", oracle_samples, "Samples for the KS and violation-rate oracle");
  cmp->add_flag("--dump-samples", dump_samples, "Also write samples.csv at the report step");
  auto* eb = app.add_subcommand("emit-basis", "Write basis.json");
  add_common(eb, basis_opts);
  auto* eq = app.add_subcommand("emit-quadrature", "Write quadrature.json");
  add_common(eq, quad_opts);
  auto* eg = app.add_subcommand("emit-galerkin", "Write galerkin.json");
  add_common(eg, gal_opts);
  auto* val = app.add_subcommand("validate", "Check a config without running");
  add_common(val, val_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(run_opts);
    if (*cmp) return cmd_compare_mc(cmp_opts, n_samples, oracle_samples, dump_samples);
    if (*eb) return cmd_emit(basis_opts, Emit::kBasis);
    if (*eq) return cmd_emit(quad_opts, Emit::kQuadrature);
    if (*eg) return cmd_emit(gal_opts, Emit::kGalerkin);
    if (*val) return cmd_validate(val_opts);
  } catch (const Error& e) {
    std::cerr << "sgmpc: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "sgmpc: error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
