#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rcmcl/data.hpp"
#include "rcmcl/fusion.hpp"
#include "rcmcl/model.hpp"
#include "rcmcl/robustness.hpp"
#include "rcmcl/trainer.hpp"

namespace rcmcl::cli {

struct DatasetOptions {
  std::size_t n_per_class = 250;
  double train_fraction = 0.8;
  std::uint64_t split_seed = 11;
};

struct ExportOptions {
  std::string split = "all";  // all | train | test
  std::size_t window = 4;
  std::size_t stride = 1;
  std::optional<char> drop_modality = 'S';  // null disables the mid-sequence cut
  std::size_t drop_from_frame = 4;
  std::size_t trace_samples = 8;
};

struct RunConfig {
  std::uint64_t seed = 1;
  GeneratorSpec data;
  DatasetOptions dataset;
  ModelDims model;  // shape and class count follow `data`
  TrainConfig train;
  CorruptionGrid grid;
  std::vector<std::uint64_t> ablation_seeds = {1, 2, 3};
  std::vector<AblationConfig> ablation_configs = all_ablation_configs();
  ExportOptions export_opts;
  std::optional<std::filesystem::path> dataset_path;
  std::optional<std::filesystem::path> checkpoint_path;

  // Everything that affects computed results except the seed.
  nlohmann::json canonical() const;
  std::string digest() const;
  // Covers only the data and dataset sections.
  std::string data_digest() const;
  TrainConfig train_config() const;  // train with the run seed applied
};

// Unknown keys anywhere raise ConfigError. Relative paths resolve against
// the config file's directory.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& file);

}  // namespace rcmcl::cli
