// dpc: differential-privacy analysis and privacy-preserving controller
// synthesis for discrete-time systems, with the two-node DC microgrid
// benchmark built in.
//
// Exit codes: 0 success, 2 validation error, 3 infeasibility, 4 numerical
// failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "dpc/estimation.hpp"
#include "dpc/gridlab.hpp"
#include "dpc/hinf.hpp"
#include "dpc/json_io.hpp"
#include "dpc/linsys.hpp"
#include "dpc/nonlinear.hpp"
#include "dpc/observability.hpp"
#include "dpc/privacy.hpp"
#include "dpc/synthesis.hpp"

namespace {

using namespace dpc;

StateSpace load_discrete_system(const std::string& path) {
  const SystemFile f = load_system(path);
  if (!f.continuous) return f.discrete();
  std::cerr << "note: " << path << " is continuous; ZOH-discretizing with dt=1e-3\n";
  return zoh_discretize(f.continuous_system(), 1e-3);
}

Matrix sigma_from_arg(const std::string& spec, Eigen::Index rows) {
  if (spec.rfind("iid:", 0) == 0) {
    const double sigma = std::stod(spec.substr(4));
    if (!(sigma > 0)) throw_validation("--sigma iid scale must be positive");
    return sigma * sigma * Matrix::Identity(rows, rows);
  }
  const Matrix S = matrix_from_json(read_json(spec).contains("Sigma")
                                        ? read_json(spec).at("Sigma")
                                        : read_json(spec));
  if (S.rows() != rows || S.cols() != rows)
    throw_validation("Sigma file has size " + std::to_string(S.rows()) +
                     ", expected " + std::to_string(rows));
  return S;
}

int cmd_analyze(const std::string& system_path, int t, std::optional<int> T,
                const std::string& sigma_spec, const std::string& out_path) {
  const StateSpace sys = load_discrete_system(system_path);
  const Eigen::Index rows = (t + 1) * sys.q();
  const Matrix Sigma =
      sigma_spec.empty() ? Matrix::Identity(rows, rows) : sigma_from_arg(sigma_spec, rows);
  const int Tval = T.value_or(t);
  const GramianReport rep = weighted_gramian(sys, t, Tval, Sigma);
  const SioReport sio = is_strongly_input_observable(sys);

  json out;
  out["gramian"] = to_json(rep);
  out["strong_input_observability"] = to_json(sio);
  const double lmax = rep.eigenvalues(rep.eigenvalues.size() - 1);
  out["privacy"] = {{"lambda_max", lmax},
                    {"achieved_floor", lmax > 0 ? 1.0 / std::sqrt(lmax) : 0.0}};
  if (out_path.empty())
    std::cout << out.dump(2) << "\n";
  else
    write_json(out_path, out);
  return 0;
}

int cmd_calibrate(const std::string& system_path, double eps, double delta, double cadj,
                  const std::string& mode, int t, const std::string& out_path) {
  const StateSpace sys = load_discrete_system(system_path);
  json out;
  out["mode"] = mode;
  out["epsilon"] = eps;
  out["delta"] = delta;
  out["c"] = cadj;
  if (mode == "output-iid") {
    PrivacyBudget budget{eps, delta, cadj, 2};
    const double sigma = min_iid_sigma(sys, budget, t);
    out["sigma_floor"] = sigma;
    out["horizon_t"] = t;
    std::cout << "i.i.d. output-noise floor: sigma >= " << sigma << " (t = " << t
              << ")\n";
  } else if (mode == "input") {
    PrivacyBudget budget{eps, delta, cadj, 2};
    const double floor = calibrate_input_gaussian(budget);
    out["lambda_min_floor"] = floor;
    std::cout << "input-noise floor: lambda_min(Sigma_1) >= " << floor
              << " (system independent)\n";
  } else if (mode == "stable") {
    PrivacyBudget budget{eps, delta, cadj, 2};
    const Matrix Oinf = infinite_observability_gramian(sys);
    const double bound =
        std::sqrt(Eigen::SelfAdjointEigenSolver<Matrix>(Oinf).eigenvalues().maxCoeff()) +
        hinf_norm(sys);
    const double floor = cadj * bound * r_value(eps, delta);
    out["lambda_min_sqrt_floor"] = floor;
    out["lambda_min_floor"] = floor * floor;
    std::cout << "stable-system floor: lambda_min(Sigma)^(1/2) >= " << floor
              << " (any horizon)\n";
  } else if (mode == "laplace") {
    PrivacyBudget budget{eps, 0.0, cadj, 1};
    if (delta != 0.0)
      throw_validation("laplace mode is (eps,0)-differential privacy; drop --delta");
    const double b = laplace_scale(sys, budget, t);
    out["laplace_scale_floor"] = b;
    out["horizon_t"] = t;
    std::cout << "Laplace floor: b >= " << b << " (t = " << t << ")\n";
  } else {
    throw_validation("unknown mode '" + mode +
                     "' (expected output-iid|input|stable|laplace)");
  }
  if (!out_path.empty()) write_json(out_path, out);
  return 0;
}

int cmd_synthesize(const std::string& plant_path, const std::string& exo_path,
                   double gamma, std::optional<double> gamma_bar, double regulator_tol,
                   const std::string& out_path) {
  const StateSpace plant = load_discrete_system(plant_path);
  const StateSpace exo = load_discrete_system(exo_path);
  PrivacyDesignOptions opts;
  opts.gamma_bar = gamma_bar;
  opts.regulator_tol_scale = regulator_tol;
  const PrivacyController pc = design_privacy_controller(plant, exo, gamma, opts);
  json out = to_json(pc);
  out["hinf_achieved"] = hinf_norm(pc.as_system());
  if (out_path.empty())
    std::cout << out.dump(2) << "\n";
  else
    write_json(out_path, out);
  std::cerr << "controller synthesized: gamma certificate " << gamma
            << ", achieved H-infinity " << out["hinf_achieved"].get<double>() << "\n";
  return 0;
}

int cmd_simulate(const std::string& plant_path, const std::string& controller_path,
                 const std::string& config_path, const std::string& summary_path) {
  const StateSpace plant = load_discrete_system(plant_path);
  const PrivacyController pc = load_controller(controller_path);
  const json cfg_json = read_json(config_path);
  ExperimentConfig cfg = experiment_config_from_json(cfg_json, plant.n());

  const Eigen::Index q = plant.q();
  StateSpace exo(Matrix::Identity(q, q), Matrix::Zero(q, 0), Matrix::Identity(q, q),
                 Matrix::Zero(q, 0));
  Vector xr0 = Vector::Zero(q);
  if (cfg_json.contains("reference")) {
    const auto& arr = cfg_json.at("reference");
    if (static_cast<Eigen::Index>(arr.size()) != q)
      throw_validation("reference must have q entries");
    for (Eigen::Index i = 0; i < q; ++i) xr0(i) = arr.at(i).get<double>();
  }
  Vector steady = Vector::Zero(plant.n());
  if (cfg_json.contains("steady_state")) {
    const auto& arr = cfg_json.at("steady_state");
    if (static_cast<Eigen::Index>(arr.size()) != plant.n())
      throw_validation("steady_state must have n entries");
    for (Eigen::Index i = 0; i < plant.n(); ++i) steady(i) = arr.at(i).get<double>();
  }
  NoiseDesign design;
  if (cfg.plan == ExperimentConfig::NoisePlan::input_gaussian)
    design = gramian_noise_design(pc, static_cast<int>(plant.m()), 10, 5, 1.0);

  const auto res = run_tracking_experiment(plant, pc, exo, xr0, steady, design, cfg);
  const json summary = to_json(res.summary);
  if (summary_path.empty())
    std::cout << summary.dump(2) << "\n";
  else
    write_json(summary_path, summary);
  return 0;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

int cmd_estimate(const std::string& controller_path, const std::string& traj_path,
                 const std::string& out_path) {
  const PrivacyController pc = load_controller(controller_path);
  const Eigen::Index mp = pc.G1.rows(), nr = pc.G2.cols(), qp = pc.L1.cols();

  std::ifstream in(traj_path);
  if (!in) throw_validation("cannot read " + traj_path);
  std::string line;
  if (!std::getline(in, line)) throw_validation("empty trajectory file");
  const auto header = split_csv_line(line);
  auto col_index = [&](const std::string& name) -> int {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  };
  std::vector<int> u_cols, xr_cols, e_cols;
  for (Eigen::Index i = 1; i <= mp; ++i)
    u_cols.push_back(col_index("u_" + std::to_string(i)));
  for (Eigen::Index i = 1; i <= nr; ++i)
    xr_cols.push_back(col_index("xr_" + std::to_string(i)));
  for (Eigen::Index i = 1; i <= qp; ++i)
    e_cols.push_back(col_index("e_" + std::to_string(i)));
  for (int idx : u_cols)
    if (idx < 0) throw_validation("trajectory CSV lacks u_i columns");
  const bool have_xr = xr_cols.front() >= 0;
  const bool have_e = e_cols.front() >= 0;

  std::vector<Vector> up, xr, e_true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    Vector u(mp);
    for (Eigen::Index i = 0; i < mp; ++i) u(i) = std::stod(cells.at(u_cols[i]));
    up.push_back(u);
    Vector x = Vector::Zero(nr);
    if (have_xr)
      for (Eigen::Index i = 0; i < nr; ++i) x(i) = std::stod(cells.at(xr_cols[i]));
    xr.push_back(x);
    if (have_e) {
      Vector e(qp);
      for (Eigen::Index i = 0; i < qp; ++i) e(i) = std::stod(cells.at(e_cols[i]));
      e_true.push_back(e);
    }
  }
  const auto est = estimate_private_errors(pc, up, xr);

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw_numerical("cannot write " + out_path);
    out = &file;
  }
  (*out) << "t";
  for (Eigen::Index i = 1; i <= qp; ++i) (*out) << ",e_hat_" << i;
  if (have_e) {
    for (Eigen::Index i = 1; i <= qp; ++i) (*out) << ",e_" << i;
    (*out) << ",error";
  }
  (*out) << "\n";
  out->precision(17);
  for (std::size_t t = 0; t < est.e_hat.size(); ++t) {
    (*out) << t;
    for (Eigen::Index i = 0; i < qp; ++i) (*out) << "," << est.e_hat[t](i);
    if (have_e) {
      for (Eigen::Index i = 0; i < qp; ++i) (*out) << "," << e_true[t](i);
      (*out) << "," << (est.e_hat[t] - e_true[t]).cwiseAbs().maxCoeff();
    }
    (*out) << "\n";
  }
  return 0;
}

int cmd_microgrid(const std::string& preset, const std::string& outdir) {
  if (preset != "paper")
    throw_validation("only --preset paper is shipped as data");
  namespace fs = std::filesystem;
  fs::create_directories(outdir);
  const auto pp = build_paper_pipeline();

  write_json(outdir + "/plant_continuous.json", to_json(pp.plant_c));
  write_json(outdir + "/plant.json", to_json(pp.plant));
  write_json(outdir + "/exosystem.json", to_json(pp.exo));
  write_json(outdir + "/controller.json", to_json(pp.controller));
  write_json(outdir + "/noise_design.json", to_json(pp.design));

  json runs = json::array();
  for (double a : {0.0, 15.8, 39.7, 64.3}) {
    ExperimentConfig cfg;
    cfg.initial_deviation = Vector::Zero(5);
    cfg.initial_deviation(0) = -4.0;  // user 1 draws 4 A more
    cfg.horizon_steps = 10000;
    cfg.dt = pp.params.dt;
    cfg.plan = a > 0 ? ExperimentConfig::NoisePlan::input_gaussian
                     : ExperimentConfig::NoisePlan::none;
    cfg.a = a;
    cfg.seed = 1;
    std::ostringstream name;
    name << outdir << "/trace_a" << a << ".csv";
    cfg.csv_path = name.str();
    const auto res = run_tracking_experiment(pp.plant, pp.controller, pp.exo,
                                             microgrid_reference(pp.params),
                                             microgrid_steady_state(pp.params),
                                             pp.design, cfg);
    json entry = to_json(res.summary);
    entry["a"] = a;
    entry["trace_csv"] = cfg.csv_path;
    runs.push_back(std::move(entry));
    std::cout << "a = " << a
              << ": steady-state error " << res.summary.steady_state_error;
    if (res.summary.epsilon_defined)
      std::cout << ", achievable epsilon " << res.summary.achievable_epsilon;
    std::cout << "\n";
  }
  json summary;
  summary["kappa"] = pp.design.kappa;
  summary["controller_hinf"] = hinf_norm(pp.controller.as_system());
  summary["runs"] = std::move(runs);
  write_json(outdir + "/summary.json", summary);
  std::cout << "artifacts written to " << outdir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"differential privacy of discrete-time systems: Gramian analysis, "
               "noise calibration, privacy-preserving tracking controllers"};
  app.require_subcommand(1);

  // analyze
  std::string an_system, an_sigma, an_out;
  int an_t = 10;
  std::optional<int> an_T;
  auto* analyze = app.add_subcommand("analyze", "input-observability Gramian + DP report");
  analyze->add_option("system", an_system, "system JSON file")->required();
  analyze->add_option("--horizon", an_t, "output horizon t")->required();
  int an_T_raw = -1;
  analyze->add_option("--T", an_T_raw, "input horizon T (default: t)");
  analyze->add_option("--sigma", an_sigma, "noise covariance: file.json or iid:<std>");
  analyze->add_option("--out", an_out, "output JSON path (default: stdout)");

  // calibrate
  std::string ca_system, ca_mode = "output-iid", ca_out;
  double ca_eps = 1.0, ca_delta = 0.05, ca_c = 1.0;
  int ca_t = 10;
  auto* calibrate = app.add_subcommand("calibrate", "noise floors for an (eps,delta) target");
  calibrate->add_option("system", ca_system, "system JSON file")->required();
  calibrate->add_option("--eps", ca_eps, "epsilon")->required();
  calibrate->add_option("--delta", ca_delta, "delta")->required();
  calibrate->add_option("--c", ca_c, "adjacency bound")->required();
  calibrate->add_option("--mode", ca_mode, "output-iid|input|stable|laplace");
  calibrate->add_option("--horizon", ca_t, "horizon t for finite-horizon modes");
  calibrate->add_option("--out", ca_out, "output JSON path");

  // synthesize
  std::string sy_plant, sy_exo, sy_out;
  double sy_gamma = 0.0;
  double sy_gamma_bar_raw = -1.0;
  double sy_reg_tol = 1e-9;
  auto* synthesize =
      app.add_subcommand("synthesize", "privacy-preserving tracking controller via LMIs");
  synthesize->add_option("plant", sy_plant, "plant JSON file")->required();
  synthesize->add_option("exo", sy_exo, "exosystem JSON file")->required();
  synthesize->add_option("--gamma", sy_gamma, "controller H-infinity bound")->required();
  synthesize->add_option("--gamma-bar", sy_gamma_bar_raw, "closed-loop H-infinity bound");
  synthesize->add_option("--regulator-tol", sy_reg_tol,
                         "accepted least-squares residual scale for the regulator "
                         "equations (the two-node benchmark needs about 0.5)");
  synthesize->add_option("--out", sy_out, "controller JSON path (default: stdout)");

  // simulate
  std::string si_plant, si_controller, si_config, si_summary;
  auto* simulate_cmd =
      app.add_subcommand("simulate", "closed-loop experiment with configured noise");
  simulate_cmd->add_option("plant", si_plant, "plant JSON file")->required();
  simulate_cmd->add_option("controller", si_controller, "controller JSON file")->required();
  simulate_cmd->add_option("--config", si_config, "experiment config JSON")->required();
  simulate_cmd->add_option("--summary", si_summary, "summary JSON path (default: stdout)");

  // estimate
  std::string es_controller, es_traj, es_out;
  auto* estimate =
      app.add_subcommand("estimate", "reconstruct tracking errors from published u_p");
  estimate->add_option("controller", es_controller, "controller JSON file")->required();
  estimate->add_option("--traj", es_traj, "trajectory CSV (u_i, xr_i[, e_i])")->required();
  estimate->add_option("--out", es_out, "reconstruction CSV path (default: stdout)");

  // microgrid
  std::string mg_preset = "paper", mg_outdir = "microgrid_out";
  auto* microgrid = app.add_subcommand("microgrid", "run the two-node benchmark pipeline");
  microgrid->add_option("--preset", mg_preset, "benchmark preset (paper)");
  microgrid->add_option("--outdir", mg_outdir, "artifact directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (analyze->parsed()) {
      if (an_T_raw >= 0) an_T = an_T_raw;
      return cmd_analyze(an_system, an_t, an_T, an_sigma, an_out);
    }
    if (calibrate->parsed())
      return cmd_calibrate(ca_system, ca_eps, ca_delta, ca_c, ca_mode, ca_t, ca_out);
    if (synthesize->parsed()) {
      std::optional<double> gb;
      if (sy_gamma_bar_raw > 0) gb = sy_gamma_bar_raw;
      return cmd_synthesize(sy_plant, sy_exo, sy_gamma, gb, sy_reg_tol, sy_out);
    }
    if (simulate_cmd->parsed())
      return cmd_simulate(si_plant, si_controller, si_config, si_summary);
    if (estimate->parsed()) return cmd_estimate(es_controller, es_traj, es_out);
    if (microgrid->parsed()) return cmd_microgrid(mg_preset, mg_outdir);
  } catch (const dpc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case dpc::Error::Kind::validation: return 2;
      case dpc::Error::Kind::infeasible: return 3;
      case dpc::Error::Kind::numerical: return 4;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
