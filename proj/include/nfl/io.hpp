#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nfl/neural.hpp"
#include "nfl/synthesis.hpp"
#include "nfl/system.hpp"

namespace nfl {

struct ParseError : Error {
  using Error::Error;
};

using Json = nlohmann::json;

// Matrices are {"rows", "cols", "data"} with data row-major; vectors are plain arrays.
Json to_json(const Mat& m);
Json to_json(const Vec& v);
Mat mat_from_json(const Json& j, const std::string& what);
Vec vec_from_json(const Json& j, const std::string& what);

Json to_json(const Activation& a);
Activation activation_from_json(const Json& j);

Json to_json(const Mlp& mlp);
Json to_json(const Inn& inn);
Mlp mlp_from_json(const Json& j);
Inn inn_from_json(const Json& j);
/// Accepts either network type; MLPs are converted.
Inn network_from_json(const Json& j);

Json to_json(const RegionZ& r);
RegionZ region_from_json(const Json& j);

Json to_json(const SynthesisResult& r);
SynthesisResult result_from_json(const Json& j);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

struct SimulationConfig {
  int horizon = 200;
  int initial_conditions = 20;
  unsigned seed = 42;
  std::vector<Vec> initial_states;  // explicit starts, used in addition to samples
};

struct ProjectConfig {
  std::filesystem::path base_dir;
  std::filesystem::path plant_file;
  std::optional<std::filesystem::path> phi_file;
  std::vector<std::filesystem::path> psi_files;
  Json region;
  Vec z_star, u_star;
  SynthesisOptions synthesis;
  SimulationConfig simulation;

  /// Loads every referenced file and cross-checks dimensions.
  BilinearNfl load_system() const;
};

ProjectConfig load_config(const std::filesystem::path& path);
Json config_to_json(const ProjectConfig& cfg);

}  // namespace nfl
