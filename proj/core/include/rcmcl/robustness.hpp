#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rcmcl/degrade.hpp"
#include "rcmcl/trainer.hpp"

namespace rcmcl {

// Relative degradation 100 * (clean - degraded) / clean. Throws if clean <= 0.
double rdp(double clean_acc, double degraded_acc);
// Gain over a reference baseline in percentage points: rdp_baseline - rdp_method.
double rgs(double rdp_baseline, double rdp_method);
// Alternative reading: relative accuracy improvement (%) under one scenario.
double rgs_relative_accuracy(double baseline_acc, double method_acc);

struct ScenarioResult {
  std::string scenario;
  double top1_accuracy = 0.0;
  std::size_t n_eval = 0;
};

struct RobustnessReport {
  static constexpr int kVersion = 1;
  ScenarioResult clean;
  std::vector<ScenarioResult> scenarios;
  std::map<std::string, double> rdp;
  std::string headline_scenario = "drop:RP";
  double rdp_headline = 0.0;
  std::optional<double> rgs;
  std::optional<double> average_rdp;  // mean per-scenario RDP (corruption grids)
  std::uint64_t seed = 0;
  std::string config_digest;

  const ScenarioResult* find(const std::string& scenario) const;
};

nlohmann::json to_json(const RobustnessReport& r);
RobustnessReport report_from_json(const nlohmann::json& j);

// The four single/dual dropout scenarios in table order.
std::vector<DegradationSpec> dropout_scenarios(std::uint64_t seed);

// Clean plus R, S, P and R&P dropout; headline is the R&P (skeleton-only) case.
RobustnessReport run_dropout_suite(const ModelParams& params, const LabeledSet& test, FusionMode mode,
                                   std::uint64_t seed);

struct CorruptionGrid {
  std::vector<double> sigmas = {0.05, 0.10, 0.15};
  std::vector<double> drop_fractions = {0.30, 0.50, 0.70};
  void validate() const;
};

// Skeleton joint noise and point-cloud sparsity grids; average RDP over all points.
RobustnessReport run_corruption_suite(const ModelParams& params, const LabeledSet& test, FusionMode mode,
                                      const CorruptionGrid& grid, std::uint64_t seed);

enum class AblationConfig {
  kSupervised = 1,      // no pre-training, full fine-tune, average fusion
  kCrossModalOnly = 3,  // L_CM, average fusion
  kPlusIntra = 4,       // L_CM + L_IM, average fusion
  kPlusDegradation = 5, // L_CM + L_IM + L_deg, average fusion
  kAmgNoDeg = 6,        // L_CM + L_IM + L_FUSION, adaptive gates
  kFull = 7,            // all terms, adaptive gates
};

std::vector<AblationConfig> all_ablation_configs();
std::string ablation_label(AblationConfig c);
// Applies the row's loss switches and fusion mode to a base config.
TrainConfig ablation_train_config(AblationConfig c, const TrainConfig& base);

struct AblationCell {
  std::uint64_t seed = 0;
  double clean_accuracy = 0.0;
  double rdp_headline = 0.0;
};

struct AblationRow {
  AblationConfig config = AblationConfig::kFull;
  std::string label;
  std::vector<AblationCell> cells;
  double mean_clean_accuracy = 0.0;
  double mean_rdp_headline = 0.0;
};

using AblationProgress = std::function<void(AblationConfig, std::uint64_t seed, const AblationCell&)>;

// Trains and evaluates each configuration for each seed. Seeds drive model
// initialization and training; the data split is shared.
std::vector<AblationRow> run_ablation_matrix(const LabeledSet& train, const LabeledSet& test, const ModelDims& dims,
                                             const TrainConfig& base, std::span<const std::uint64_t> seeds,
                                             std::span<const AblationConfig> configs = {},
                                             const AblationProgress& progress = {});
// One row's cell for a single seed; shared by the matrix and the acceptance suite.
AblationCell run_ablation_cell(AblationConfig c, const LabeledSet& train, const LabeledSet& test,
                               const ModelDims& dims, const TrainConfig& base, std::uint64_t seed,
                               ModelParams* trained = nullptr);

// CSV layouts mirroring the dropout, corruption and ablation tables.
std::string dropout_table_csv(const RobustnessReport& r);
std::string corruption_table_csv(const RobustnessReport& r);
std::string ablation_table_csv(const std::vector<AblationRow>& rows);
nlohmann::json ablation_to_json(const std::vector<AblationRow>& rows);

}  // namespace rcmcl
