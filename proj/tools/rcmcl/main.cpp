#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"
#include "rcmcl/error.hpp"
#include "rcmcl/parallel.hpp"

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kNumeric = 3, kIo = 4 };

void setup_logging() {
  auto logger = spdlog::stderr_logger_st("rcmcl");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  const char* env = std::getenv("RCMCL_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "info" || level.empty()) {
    spdlog::set_level(spdlog::level::info);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    throw rcmcl::ConfigError("RCMCL_LOG must be error, info or debug (got '" + level + "')");
  }
}

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "rcmcl-out";
  int threads = 1;
  std::string data, checkpoint, baseline;
  bool allow_digest_mismatch = false;
};

rcmcl::cli::Context make_context(const Flags& f) {
  rcmcl::cli::Context ctx;
  ctx.cfg = f.config.empty() ? rcmcl::cli::parse_run_config(nlohmann::json::object())
                             : rcmcl::cli::load_run_config(f.config);
  if (f.seed) ctx.cfg.seed = *f.seed;
  ctx.out = f.out;
  if (!f.data.empty()) ctx.data_dir = f.data;
  if (!f.checkpoint.empty()) ctx.checkpoint_dir = f.checkpoint;
  if (!f.baseline.empty()) ctx.baseline_report = f.baseline;
  ctx.allow_digest_mismatch = f.allow_digest_mismatch;
  if (f.threads < 1) throw rcmcl::ConfigError("--threads must be >= 1");
  rcmcl::set_num_threads(f.threads);
  spdlog::debug("config digest {} seed {} threads {}", ctx.cfg.digest(), ctx.cfg.seed, f.threads);
  return ctx;
}

int run(int argc, char** argv) {
  CLI::App app{"Robust cross-modal contrastive pre-training on synthetic multimodal actions"};
  app.require_subcommand(1);
  Flags flags;

  using Command = void (*)(const rcmcl::cli::Context&);
  std::function<void()> selected;
  const auto add = [&](const char* name, const char* help, Command fn, bool uses_checkpoint, bool uses_data,
                       bool uses_baseline = false) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config, "JSON run configuration");
    sub->add_option("--seed", flags.seed, "Run seed (overrides the config)");
    sub->add_option("--out", flags.out, "Output directory")->capture_default_str();
    sub->add_option("--threads", flags.threads, "Worker threads")->capture_default_str();
    if (uses_data) sub->add_option("--data", flags.data, "Dataset directory (default: paths.dataset or OUT/dataset)");
    if (uses_checkpoint) {
      sub->add_option("--checkpoint", flags.checkpoint,
                      "Checkpoint directory (default: paths.checkpoint or OUT/checkpoint)");
    }
    if (uses_data || uses_checkpoint) {
      sub->add_flag("--allow-digest-mismatch", flags.allow_digest_mismatch,
                    "Use artifacts produced under a different config");
    }
    if (uses_baseline) sub->add_option("--baseline", flags.baseline, "Baseline dropout report JSON, for RGS");
    sub->callback([&, fn] { selected = [&, fn] { fn(make_context(flags)); }; });
  };
  add("gen-data", "Generate the synthetic dataset and its split", rcmcl::cli::cmd_gen_data, false, false);
  add("pretrain", "Self-supervised pre-training; writes a checkpoint and loss history", rcmcl::cli::cmd_pretrain,
      false, true);
  add("probe", "Linear probe on frozen encoders and gates", rcmcl::cli::cmd_probe, true, true);
  add("finetune", "Supervised fine-tuning of the whole model", rcmcl::cli::cmd_finetune, true, true);
  add("robustness", "Modality dropout and corruption suites", rcmcl::cli::cmd_robustness, true, true, true);
  add("ablate", "Loss/fusion ablation matrix over seeds", rcmcl::cli::cmd_ablate, false, true);
  add("export-embeddings", "Per-modality embeddings and gate traces as CSV", rcmcl::cli::cmd_export_embeddings, true,
      true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }
  selected();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  rcmcl::configure_allocator();
  try {
    setup_logging();
    return run(argc, argv);
  } catch (const rcmcl::ConfigError& e) {
    spdlog::error("config: {}", e.what());
    return kConfig;
  } catch (const nlohmann::json::exception& e) {
    spdlog::error("config: {}", e.what());
    return kConfig;
  } catch (const rcmcl::IoError& e) {
    spdlog::error("io: {}", e.what());
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    spdlog::error("io: {}", e.what());
    return kIo;
  } catch (const rcmcl::NumericError& e) {
    spdlog::error("numeric: {}", e.what());
    return kNumeric;
  } catch (const rcmcl::ShapeError& e) {
    spdlog::error("shape: {}", e.what());
    return kNumeric;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
}
