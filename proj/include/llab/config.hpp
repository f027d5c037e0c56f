#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nlohmann/json.hpp"

#include "llab/dataset.hpp"
#include "llab/hessian.hpp"
#include "llab/model.hpp"
#include "llab/train.hpp"

namespace llab {

struct SpectrumConfig {
  SlqSettings slq;
  double eps_rel = 0.01;
  bool restricted = true;
  std::vector<int> k_list{0};
  std::vector<double> r_list{10.0};
};

struct ExperimentConfig {
  std::string model_name = "mlp-small";
  std::vector<int> input_shape{64};
  int n_classes = 10;
  DatasetSpec dataset;
  TrainRecipe recipe;
  std::string algorithm = "vanilla";  // vanilla | ilot | rise
  std::vector<double> r_grid{100.0};
  std::vector<int> k_grid{0};
  std::vector<int> i_grid{1};
  std::vector<uint64_t> seeds{1};
  SpectrumConfig spectrum;
  bool count_discovery = false;        // ledger mode for the FLOP axis
  bool schedule_restart_local = false; // ablation: restart LR schedule after rewind
  std::string output_dir = "results";
  int workers = 1;

  std::string ledger_mode() const {
    return count_discovery ? "include-discovery" : "exclude-discovery";
  }
};

// Strict parse: unknown keys are rejected and all constraint violations
// are reported together.
ExperimentConfig parse_config(const std::filesystem::path& path);
ExperimentConfig parse_config_json(const nlohmann::json& j);

// Fully-resolved echo, written into the output directory and embedded in
// every result file.
nlohmann::json config_to_json(const ExperimentConfig& config);

}  // namespace llab
