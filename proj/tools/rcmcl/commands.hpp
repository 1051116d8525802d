#pragma once

#include <filesystem>
#include <optional>

#include "run_config.hpp"

namespace rcmcl::cli {

struct Context {
  RunConfig cfg;
  std::filesystem::path out = "rcmcl-out";
  std::optional<std::filesystem::path> data_dir;        // overrides paths.dataset
  std::optional<std::filesystem::path> checkpoint_dir;  // overrides paths.checkpoint
  std::optional<std::filesystem::path> baseline_report;
  bool allow_digest_mismatch = false;
};

void cmd_gen_data(const Context& ctx);
void cmd_pretrain(const Context& ctx);
void cmd_probe(const Context& ctx);
void cmd_finetune(const Context& ctx);
void cmd_robustness(const Context& ctx);
void cmd_ablate(const Context& ctx);
void cmd_export_embeddings(const Context& ctx);

}  // namespace rcmcl::cli
