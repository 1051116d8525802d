#pragma once

#include <filesystem>
#include <functional>
#include <string>

#include <nlohmann/json.hpp>

#include "rcmcl/model.hpp"

namespace rcmcl {

struct Checkpoint {
  ModelParams params;
  nlohmann::json manifest;
};

// Directory layout: manifest.json plus one <name>.rcm matrix per tensor.
// Written to a sibling temp directory and renamed into place. `extra` keys
// (seed, config digest, provenance) are merged into the manifest.
void save_checkpoint(const std::filesystem::path& dir, const ModelParams& params,
                     const nlohmann::json& extra = nlohmann::json::object());
Checkpoint load_checkpoint(const std::filesystem::path& dir);

// Replaces `dir` atomically with the contents produced by `write(tmp_dir)`.
void write_directory_atomically(const std::filesystem::path& dir,
                                const std::function<void(const std::filesystem::path&)>& write);
void write_text_atomically(const std::filesystem::path& file, const std::string& text);

}  // namespace rcmcl
