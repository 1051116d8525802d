#include "rcmcl/robustness.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "rcmcl/error.hpp"

using nlohmann::json;

namespace rcmcl {

double rdp(double clean_acc, double degraded_acc) {
  if (!(clean_acc > 0.0)) throw ConfigError("rdp: clean accuracy must be > 0");
  return 100.0 * (clean_acc - degraded_acc) / clean_acc;
}

double rgs(double rdp_baseline, double rdp_method) { return rdp_baseline - rdp_method; }

double rgs_relative_accuracy(double baseline_acc, double method_acc) {
  if (!(baseline_acc > 0.0)) throw ConfigError("rgs_relative_accuracy: baseline accuracy must be > 0");
  return 100.0 * (method_acc - baseline_acc) / baseline_acc;
}

const ScenarioResult* RobustnessReport::find(const std::string& scenario) const {
  if (scenario == clean.scenario) return &clean;
  for (const auto& s : scenarios) {
    if (s.scenario == scenario) return &s;
  }
  return nullptr;
}

namespace {

json scenario_json(const ScenarioResult& s) {
  return {{"scenario", s.scenario}, {"top1_accuracy", s.top1_accuracy}, {"n_eval", s.n_eval}};
}

ScenarioResult scenario_from(const json& j) {
  return {j.at("scenario").get<std::string>(), j.at("top1_accuracy").get<double>(), j.at("n_eval").get<std::size_t>()};
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

ScenarioResult evaluate_scenario(const ModelParams& params, const LabeledSet& test, FusionMode mode,
                                 const DegradationSpec& spec) {
  return {spec.label(), evaluate_accuracy(params, test, mode, spec), test.size()};
}

void fill_rdp(RobustnessReport& r) {
  for (const auto& s : r.scenarios) r.rdp[s.scenario] = rdp(r.clean.top1_accuracy, s.top1_accuracy);
}

}  // namespace

json to_json(const RobustnessReport& r) {
  json scenarios = json::array();
  for (const auto& s : r.scenarios) scenarios.push_back(scenario_json(s));
  json j = {{"version", RobustnessReport::kVersion},
            {"seed", r.seed},
            {"config_digest", r.config_digest},
            {"clean", scenario_json(r.clean)},
            {"scenarios", scenarios},
            {"rdp", r.rdp},
            {"headline_scenario", r.headline_scenario},
            {"rdp_headline", r.rdp_headline},
            {"rgs", nullptr},
            {"average_rdp", nullptr}};
  if (r.rgs) j["rgs"] = *r.rgs;
  if (r.average_rdp) j["average_rdp"] = *r.average_rdp;
  return j;
}

RobustnessReport report_from_json(const json& j) {
  try {
    if (j.at("version").get<int>() != RobustnessReport::kVersion) {
      throw IoError("robustness report: unsupported version " + j.at("version").dump());
    }
    RobustnessReport r;
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config_digest = j.at("config_digest").get<std::string>();
    r.clean = scenario_from(j.at("clean"));
    for (const auto& s : j.at("scenarios")) r.scenarios.push_back(scenario_from(s));
    r.rdp = j.at("rdp").get<std::map<std::string, double>>();
    r.headline_scenario = j.at("headline_scenario").get<std::string>();
    r.rdp_headline = j.at("rdp_headline").get<double>();
    if (!j.at("rgs").is_null()) r.rgs = j["rgs"].get<double>();
    if (!j.at("average_rdp").is_null()) r.average_rdp = j["average_rdp"].get<double>();
    return r;
  } catch (const json::exception& e) {
    throw IoError("robustness report: " + std::string(e.what()));
  }
}

std::vector<DegradationSpec> dropout_scenarios(std::uint64_t seed) {
  return {DegradationSpec::dropout("R", seed), DegradationSpec::dropout("S", seed),
          DegradationSpec::dropout("P", seed), DegradationSpec::dropout("RP", seed)};
}

RobustnessReport run_dropout_suite(const ModelParams& params, const LabeledSet& test, FusionMode mode,
                                   std::uint64_t seed) {
  if (test.size() == 0) throw ConfigError("run_dropout_suite: empty split");
  RobustnessReport r;
  r.seed = seed;
  r.clean = evaluate_scenario(params, test, mode, DegradationSpec::none());
  for (const auto& spec : dropout_scenarios(seed)) r.scenarios.push_back(evaluate_scenario(params, test, mode, spec));
  fill_rdp(r);
  r.headline_scenario = DegradationSpec::dropout("RP").label();
  r.rdp_headline = r.rdp.at(r.headline_scenario);
  return r;
}

void CorruptionGrid::validate() const {
  if (sigmas.empty() && drop_fractions.empty()) throw ConfigError("corruption grid: both grids are empty");
  for (double s : sigmas) {
    if (!(s >= 0.0)) throw ConfigError("corruption grid: sigma must be >= 0");
  }
  for (double d : drop_fractions) {
    if (!(d >= 0.0 && d < 1.0)) throw ConfigError("corruption grid: drop fraction must be in [0, 1)");
  }
}

RobustnessReport run_corruption_suite(const ModelParams& params, const LabeledSet& test, FusionMode mode,
                                      const CorruptionGrid& grid, std::uint64_t seed) {
  grid.validate();
  if (test.size() == 0) throw ConfigError("run_corruption_suite: empty split");
  RobustnessReport r;
  r.seed = seed;
  r.clean = evaluate_scenario(params, test, mode, DegradationSpec::none());
  for (double s : grid.sigmas) {
    r.scenarios.push_back(evaluate_scenario(params, test, mode, DegradationSpec::skeleton_noise(s, seed)));
  }
  for (double d : grid.drop_fractions) {
    r.scenarios.push_back(evaluate_scenario(params, test, mode, DegradationSpec::point_sparsity(d, seed)));
  }
  fill_rdp(r);
  double sum = 0.0;
  const ScenarioResult* worst = &r.scenarios.front();
  for (const auto& s : r.scenarios) {
    sum += r.rdp.at(s.scenario);
    if (r.rdp.at(s.scenario) > r.rdp.at(worst->scenario)) worst = &s;
  }
  r.average_rdp = sum / static_cast<double>(r.scenarios.size());
  r.headline_scenario = worst->scenario;
  r.rdp_headline = r.rdp.at(worst->scenario);
  return r;
}

std::vector<AblationConfig> all_ablation_configs() {
  return {AblationConfig::kSupervised, AblationConfig::kCrossModalOnly, AblationConfig::kPlusIntra,
          AblationConfig::kPlusDegradation, AblationConfig::kAmgNoDeg, AblationConfig::kFull};
}

std::string ablation_label(AblationConfig c) {
  switch (c) {
    case AblationConfig::kSupervised: return "supervised_avg";
    case AblationConfig::kCrossModalOnly: return "cm_avg";
    case AblationConfig::kPlusIntra: return "cm_im_avg";
    case AblationConfig::kPlusDegradation: return "cm_im_deg_avg";
    case AblationConfig::kAmgNoDeg: return "cm_im_fuse_amg";
    case AblationConfig::kFull: break;
  }
  return "full_amg";
}

TrainConfig ablation_train_config(AblationConfig c, const TrainConfig& base) {
  TrainConfig t = base;
  LossConfig& l = t.loss;
  t.fusion = FusionMode::kAverage;
  switch (c) {
    case AblationConfig::kSupervised:
      l.lambda_cm = l.lambda_im = l.lambda_deg = l.lambda_fuse = 0.0;
      break;
    case AblationConfig::kCrossModalOnly:
      l.lambda_im = l.lambda_deg = l.lambda_fuse = 0.0;
      break;
    case AblationConfig::kPlusIntra:
      l.lambda_deg = l.lambda_fuse = 0.0;
      break;
    case AblationConfig::kPlusDegradation:
      l.lambda_fuse = 0.0;
      break;
    case AblationConfig::kAmgNoDeg:
      l.lambda_deg = 0.0;
      t.fusion = FusionMode::kAdaptive;
      break;
    case AblationConfig::kFull:
      t.fusion = FusionMode::kAdaptive;
      break;
  }
  return t;
}

AblationCell run_ablation_cell(AblationConfig c, const LabeledSet& train, const LabeledSet& test,
                               const ModelDims& dims, const TrainConfig& base, std::uint64_t seed,
                               ModelParams* trained) {
  TrainConfig tc = ablation_train_config(c, base);
  tc.seed = seed;
  const ModelParams init = init_params(dims, seed);
  SupervisedResult res;
  if (c == AblationConfig::kSupervised) {
    res = full_finetune(init, train, test, tc);
  } else {
    PretrainResult pre = pretrain(train.inputs, init, tc);
    res = linear_probe(pre.params, train, test, tc);
  }
  const RobustnessReport rep = run_dropout_suite(res.params, test, tc.fusion, seed);
  if (trained) *trained = res.params;
  return {seed, rep.clean.top1_accuracy, rep.rdp_headline};
}

std::vector<AblationRow> run_ablation_matrix(const LabeledSet& train, const LabeledSet& test, const ModelDims& dims,
                                             const TrainConfig& base, std::span<const std::uint64_t> seeds,
                                             std::span<const AblationConfig> configs,
                                             const AblationProgress& progress) {
  if (seeds.empty()) throw ConfigError("run_ablation_matrix: no seeds");
  const std::vector<AblationConfig> all = all_ablation_configs();
  if (configs.empty()) configs = all;
  std::vector<AblationRow> rows;
  for (AblationConfig c : configs) {
    AblationRow row;
    row.config = c;
    row.label = ablation_label(c);
    for (std::uint64_t s : seeds) {
      row.cells.push_back(run_ablation_cell(c, train, test, dims, base, s));
      if (progress) progress(c, s, row.cells.back());
      row.mean_clean_accuracy += row.cells.back().clean_accuracy;
      row.mean_rdp_headline += row.cells.back().rdp_headline;
    }
    row.mean_clean_accuracy /= static_cast<double>(seeds.size());
    row.mean_rdp_headline /= static_cast<double>(seeds.size());
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string dropout_table_csv(const RobustnessReport& r) {
  auto acc = [&](const char* label) {
    const ScenarioResult* s = r.find(label);
    return s ? fmt(s->top1_accuracy) : std::string();
  };
  std::ostringstream os;
  os << "config_digest,seed,all_three,r_missing,s_missing,p_missing,rp_missing,rdp,rgs\n";
  os << r.config_digest << ',' << r.seed << ',' << fmt(r.clean.top1_accuracy) << ',' << acc("drop:R") << ','
     << acc("drop:S") << ',' << acc("drop:P") << ',' << acc("drop:RP") << ',' << fmt(r.rdp_headline) << ','
     << (r.rgs ? fmt(*r.rgs) : std::string()) << '\n';
  return os.str();
}

std::string corruption_table_csv(const RobustnessReport& r) {
  std::ostringstream os;
  os << "scenario,top1_accuracy,rdp\n";
  os << r.clean.scenario << ',' << fmt(r.clean.top1_accuracy) << ",0.0000\n";
  for (const auto& s : r.scenarios) {
    os << s.scenario << ',' << fmt(s.top1_accuracy) << ',' << fmt(r.rdp.at(s.scenario)) << '\n';
  }
  if (r.average_rdp) os << "average,," << fmt(*r.average_rdp) << '\n';
  return os.str();
}

std::string ablation_table_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "config,label";
  if (!rows.empty()) {
    for (const auto& c : rows.front().cells) os << ",clean_acc_s" << c.seed;
    for (const auto& c : rows.front().cells) os << ",rdp_rp_s" << c.seed;
  }
  os << ",clean_acc_mean,rdp_rp_mean\n";
  for (const auto& row : rows) {
    os << static_cast<int>(row.config) << ',' << row.label;
    for (const auto& c : row.cells) os << ',' << fmt(c.clean_accuracy);
    for (const auto& c : row.cells) os << ',' << fmt(c.rdp_headline);
    os << ',' << fmt(row.mean_clean_accuracy) << ',' << fmt(row.mean_rdp_headline) << '\n';
  }
  return os.str();
}

json ablation_to_json(const std::vector<AblationRow>& rows) {
  json out = json::array();
  for (const auto& row : rows) {
    json cells = json::array();
    for (const auto& c : row.cells) {
      cells.push_back({{"seed", c.seed}, {"clean_accuracy", c.clean_accuracy}, {"rdp_headline", c.rdp_headline}});
    }
    out.push_back({{"config", static_cast<int>(row.config)},
                   {"label", row.label},
                   {"cells", cells},
                   {"mean_clean_accuracy", row.mean_clean_accuracy},
                   {"mean_rdp_headline", row.mean_rdp_headline}});
  }
  return out;
}

}  // namespace rcmcl
