#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include <nlohmann/json.hpp>

#include "rcmcl/data.hpp"

namespace rcmcl {

struct DatasetSplit {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  SplitIds ids;
};

struct StoredDataset {
  Dataset dataset;
  std::optional<DatasetSplit> split;
  nlohmann::json manifest;

  LabeledSet train() const;  // requires split
  LabeledSet test() const;
};

// Directory: manifest.json, rgbd.rcm, skeleton.rcm, points.rcm, labels.bin.
// labels.bin is "RCL1", count (u64 LE), then count int32 LE labels.
void save_dataset(const std::filesystem::path& dir, const Dataset& ds, const std::optional<DatasetSplit>& split,
                  const nlohmann::json& extra = nlohmann::json::object());
StoredDataset load_dataset(const std::filesystem::path& dir);

}  // namespace rcmcl
