#include "dpc/json_io.hpp"

#include <fstream>

namespace dpc {

json matrix_to_json(const Matrix& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array()) throw_validation("matrix JSON must be an array of rows");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return Matrix(0, 0);
  const Eigen::Index cols = static_cast<Eigen::Index>(j.at(0).size());
  Matrix M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j.at(i).size()) != cols)
      throw_validation("matrix JSON rows have inconsistent lengths");
    for (Eigen::Index c = 0; c < cols; ++c) M(i, c) = j.at(i).at(c).get<double>();
  }
  return M;
}

json to_json(const StateSpace& sys) {
  return json{{"A", matrix_to_json(sys.A)},
              {"B", matrix_to_json(sys.B)},
              {"C", matrix_to_json(sys.C)},
              {"D", matrix_to_json(sys.D)}};
}

json to_json(const ContinuousStateSpace& sys) {
  json j = json{{"A", matrix_to_json(sys.A)},
                {"B", matrix_to_json(sys.B)},
                {"C", matrix_to_json(sys.C)},
                {"D", matrix_to_json(sys.D)}};
  j["continuous"] = true;
  return j;
}

StateSpace SystemFile::discrete() const {
  if (continuous)
    throw_validation("system file is continuous; discretize it first (zoh)");
  return StateSpace(A, B, C, D);
}

ContinuousStateSpace SystemFile::continuous_system() const {
  if (!continuous) throw_validation("system file is discrete");
  return ContinuousStateSpace(A, B, C, D);
}

SystemFile system_from_json(const json& j) {
  SystemFile f;
  for (const char* key : {"A", "B", "C", "D"})
    if (!j.contains(key)) throw_validation(std::string("system JSON missing ") + key);
  f.A = matrix_from_json(j.at("A"));
  f.B = matrix_from_json(j.at("B"));
  f.C = matrix_from_json(j.at("C"));
  f.D = matrix_from_json(j.at("D"));
  f.continuous = j.value("continuous", false);
  return f;
}

SystemFile load_system(const std::string& path) { return system_from_json(read_json(path)); }

json to_json(const GramianReport& rep) {
  json j;
  j["t"] = rep.t;
  j["T"] = rep.T;
  json ev = json::array();
  for (Eigen::Index i = 0; i < rep.eigenvalues.size(); ++i)
    ev.push_back(rep.eigenvalues(i));
  j["eigenvalues"] = std::move(ev);
  j["block_projections"] = matrix_to_json(rep.block_projections);
  const double lmax = rep.eigenvalues(rep.eigenvalues.size() - 1);
  j["lambda_max"] = lmax;
  j["lambda_min"] = rep.eigenvalues(0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < rep.eigenvalues.size(); ++i)
    if (rep.eigenvalues(i) >
        default_rank_tol(rep.gramian.rows(), rep.gramian.cols(), lmax))
      ++rank;
  j["numerical_rank"] = rank;
  j["size"] = rep.gramian.rows();
  return j;
}

json to_json(const SioReport& rep) {
  return json{{"observable", rep.observable},
              {"rank", rep.rank},
              {"required", rep.required},
              {"singular_values", rep.singular_values}};
}

json to_json(const MechanismReport& rep) {
  json j{{"passed", rep.passed},
         {"achieved_floor", rep.achieved_floor},
         {"required_floor", rep.required_floor},
         {"margin", rep.margin},
         {"achievable_epsilon", rep.achievable_epsilon},
         {"horizon_t", rep.horizon_t},
         {"detail", rep.detail}};
  json ev = json::array();
  for (Eigen::Index i = 0; i < rep.eigenvalues.size(); ++i)
    ev.push_back(rep.eigenvalues(i));
  j["eigenvalues"] = std::move(ev);
  return j;
}

json to_json(const PrivacyController& pc) {
  return json{{"G1", matrix_to_json(pc.G1)},     {"G2", matrix_to_json(pc.G2)},
              {"L1", matrix_to_json(pc.L1)},     {"Abar_c", matrix_to_json(pc.Abar_c)},
              {"Abar_r", matrix_to_json(pc.Abar_r)}, {"gamma", pc.gamma}};
}

PrivacyController controller_from_json(const json& j) {
  PrivacyController pc;
  pc.G1 = matrix_from_json(j.at("G1"));
  pc.G2 = matrix_from_json(j.at("G2"));
  pc.L1 = matrix_from_json(j.at("L1"));
  pc.Abar_c = matrix_from_json(j.at("Abar_c"));
  pc.Abar_r = matrix_from_json(j.at("Abar_r"));
  pc.gamma = j.at("gamma").get<double>();
  return pc;
}

PrivacyController load_controller(const std::string& path) {
  return controller_from_json(read_json(path));
}

json to_json(const NoiseDesign& design) {
  json j;
  j["a"] = design.a;
  j["kappa"] = design.kappa;
  j["used_eigenpairs"] = design.used_eigenpairs;
  json ev = json::array();
  for (Eigen::Index i = 0; i < design.eigenvalues.size(); ++i)
    ev.push_back(design.eigenvalues(i));
  j["eigenvalues"] = std::move(ev);
  json blocks = json::array();
  for (const auto& b : design.per_user) blocks.push_back(matrix_to_json(b));
  j["per_user"] = std::move(blocks);
  json unit = json::array();
  for (const auto& b : design.per_user_unit) unit.push_back(matrix_to_json(b));
  j["per_user_unit"] = std::move(unit);
  return j;
}

json to_json(const ExperimentSummary& s) {
  json j;
  j["steady_state_error"] = s.steady_state_error;
  j["user_output_variance"] = s.user_output_variance;
  j["variance_ratio"] = s.variance_ratio;
  if (s.epsilon_defined) j["achievable_epsilon"] = s.achievable_epsilon;
  json fo = json::array();
  for (Eigen::Index i = 0; i < s.final_outputs.size(); ++i)
    fo.push_back(s.final_outputs(i));
  j["final_outputs"] = std::move(fo);
  j["masking_z"] = s.masking_z;
  return j;
}

ExperimentConfig experiment_config_from_json(const json& j, Eigen::Index plant_n) {
  ExperimentConfig cfg;
  cfg.initial_deviation = Vector::Zero(plant_n);
  if (j.contains("initial_deviation")) {
    const auto& arr = j.at("initial_deviation");
    if (static_cast<Eigen::Index>(arr.size()) != plant_n)
      throw_validation("experiment config: initial_deviation must have plant state dim");
    for (Eigen::Index i = 0; i < plant_n; ++i)
      cfg.initial_deviation(i) = arr.at(i).get<double>();
  }
  const std::string plan = j.value("noise", "none");
  if (plan == "none")
    cfg.plan = ExperimentConfig::NoisePlan::none;
  else if (plan == "input")
    cfg.plan = ExperimentConfig::NoisePlan::input_gaussian;
  else if (plan == "output")
    cfg.plan = ExperimentConfig::NoisePlan::output_gaussian;
  else
    throw_validation("experiment config: noise must be none|input|output");
  cfg.a = j.value("a", 0.0);
  cfg.output_std = j.value("output_std", 0.0);
  cfg.horizon_steps = j.value("horizon_steps", 10000);
  cfg.dt = j.value("dt", 1e-3);
  cfg.seed = j.value("seed", 1ULL);
  cfg.delta = j.value("delta", 0.0446);
  cfg.c = j.value("c", 1.0);
  cfg.csv_path = j.value("csv_path", std::string());
  return cfg;
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw_numerical("cannot write " + path);
  out << j.dump(2) << "\n";
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_validation("cannot read " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw_validation("invalid JSON in " + path + ": " + e.what());
  }
  return j;
}

}  // namespace dpc
