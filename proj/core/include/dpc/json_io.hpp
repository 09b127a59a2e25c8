#pragma once

#include <string>

#include <json.hpp>

#include "dpc/gridlab.hpp"
#include "dpc/linsys.hpp"
#include "dpc/observability.hpp"
#include "dpc/privacy.hpp"
#include "dpc/synthesis.hpp"

namespace dpc {

using json = nlohmann::json;

json matrix_to_json(const Matrix& M);          // row-major nested arrays
Matrix matrix_from_json(const json& j);

json to_json(const StateSpace& sys);
json to_json(const ContinuousStateSpace& sys);

/// A system file is either discrete or marked "continuous": true.
struct SystemFile {
  bool continuous = false;
  Matrix A, B, C, D;

  StateSpace discrete() const;
  ContinuousStateSpace continuous_system() const;
};
SystemFile system_from_json(const json& j);
SystemFile load_system(const std::string& path);

json to_json(const GramianReport& rep);
json to_json(const SioReport& rep);
json to_json(const MechanismReport& rep);
json to_json(const PrivacyController& pc);
PrivacyController controller_from_json(const json& j);
PrivacyController load_controller(const std::string& path);
json to_json(const NoiseDesign& design);
json to_json(const ExperimentSummary& summary);

ExperimentConfig experiment_config_from_json(const json& j, Eigen::Index plant_n);

void write_json(const std::string& path, const json& j);
json read_json(const std::string& path);

}  // namespace dpc
