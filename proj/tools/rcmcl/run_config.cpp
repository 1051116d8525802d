#include "run_config.hpp"

#include <fstream>

#include "rcmcl/error.hpp"
#include "rcmcl/json_io.hpp"

namespace rcmcl::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

template <typename T>
void read(const json& j, const char* key, T& out, std::string_view ctx) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(ctx) + "." + key + ": wrong type " + j.at(key).dump());
  }
}

json model_json(const ModelDims& d) {
  json j = to_json(d);
  for (const char* k : {"frames", "joints", "points", "rgbd_dim", "num_classes"}) j.erase(k);
  return j;
}

json export_json(const ExportOptions& e) {
  return {{"split", e.split},
          {"window", e.window},
          {"stride", e.stride},
          {"drop_modality", e.drop_modality ? json(std::string(1, *e.drop_modality)) : json(nullptr)},
          {"drop_from_frame", e.drop_from_frame},
          {"trace_samples", e.trace_samples}};
}

fs::path resolve(const json& j, const fs::path& base_dir) {
  fs::path p = j.get<std::string>();
  return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
}

}  // namespace

json RunConfig::canonical() const {
  json train_j = to_json(train);
  train_j.erase("seed");
  std::vector<int> configs;
  for (AblationConfig c : ablation_configs) configs.push_back(static_cast<int>(c));
  return {{"data", to_json(data)},
          {"dataset",
           {{"n_per_class", dataset.n_per_class},
            {"train_fraction", dataset.train_fraction},
            {"split_seed", dataset.split_seed}}},
          {"model", model_json(model)},
          {"train", train_j},
          {"robustness", {{"grid", to_json(grid)}}},
          {"ablation", {{"seeds", ablation_seeds}, {"configs", configs}}},
          {"export", export_json(export_opts)}};
}

std::string RunConfig::digest() const { return json_digest(canonical()); }

std::string RunConfig::data_digest() const {
  const json c = canonical();
  return json_digest({{"data", c["data"]}, {"dataset", c["dataset"]}});
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t = train;
  t.seed = seed;
  return t;
}

RunConfig parse_run_config(const json& j, const fs::path& base_dir) {
  RunConfig rc;
  require_known_keys(j, {"seed", "data", "dataset", "model", "train", "robustness", "ablation", "export", "paths"},
                     "config");
  read(j, "seed", rc.seed, "config");
  if (j.contains("data")) rc.data = generator_spec_from_json(j["data"]);
  rc.data.validate();

  if (j.contains("dataset")) {
    const json& d = j["dataset"];
    require_known_keys(d, {"n_per_class", "train_fraction", "split_seed"}, "dataset");
    read(d, "n_per_class", rc.dataset.n_per_class, "dataset");
    read(d, "train_fraction", rc.dataset.train_fraction, "dataset");
    read(d, "split_seed", rc.dataset.split_seed, "dataset");
  }
  if (rc.dataset.n_per_class < 2) throw ConfigError("dataset.n_per_class must be >= 2");
  if (!(rc.dataset.train_fraction > 0.0 && rc.dataset.train_fraction < 1.0)) {
    throw ConfigError("dataset.train_fraction must be in (0, 1)");
  }

  if (j.contains("model")) {
    for (const char* k : {"frames", "joints", "points", "rgbd_dim", "num_classes"}) {
      if (j["model"].contains(k)) throw ConfigError(std::string("model.") + k + ": set it under data");
    }
    rc.model = model_dims_from_json(j["model"]);
  }
  rc.model.shape = rc.data.shape();
  rc.model.num_classes = rc.data.num_classes;
  rc.model.validate();

  if (j.contains("train")) {
    if (j["train"].is_object() && j["train"].contains("seed")) throw ConfigError("train.seed: use the top-level seed");
    rc.train = train_config_from_json(j["train"]);
  }
  rc.train.validate();

  if (j.contains("robustness")) {
    const json& r = j["robustness"];
    require_known_keys(r, {"grid"}, "robustness");
    if (r.contains("grid")) rc.grid = corruption_grid_from_json(r["grid"]);
  }

  if (j.contains("ablation")) {
    const json& a = j["ablation"];
    require_known_keys(a, {"seeds", "configs"}, "ablation");
    read(a, "seeds", rc.ablation_seeds, "ablation");
    if (a.contains("configs")) {
      std::vector<int> ids;
      read(a, "configs", ids, "ablation");
      rc.ablation_configs.clear();
      for (int id : ids) {
        bool known = false;
        for (AblationConfig c : all_ablation_configs()) {
          if (static_cast<int>(c) == id) {
            rc.ablation_configs.push_back(c);
            known = true;
          }
        }
        if (!known) throw ConfigError("ablation.configs: unknown configuration " + std::to_string(id));
      }
    }
    if (rc.ablation_seeds.empty()) throw ConfigError("ablation.seeds must not be empty");
  }

  if (j.contains("export")) {
    const json& e = j["export"];
    ExportOptions& o = rc.export_opts;
    require_known_keys(e, {"split", "window", "stride", "drop_modality", "drop_from_frame", "trace_samples"},
                       "export");
    read(e, "split", o.split, "export");
    read(e, "window", o.window, "export");
    read(e, "stride", o.stride, "export");
    read(e, "drop_from_frame", o.drop_from_frame, "export");
    read(e, "trace_samples", o.trace_samples, "export");
    if (e.contains("drop_modality")) {
      if (e["drop_modality"].is_null()) {
        o.drop_modality.reset();
      } else {
        std::string m;
        read(e, "drop_modality", m, "export");
        if (m.size() != 1) throw ConfigError("export.drop_modality must be one of R, S, P or null");
        (void)modality_from_letter(m[0]);
        o.drop_modality = m[0];
      }
    }
  }
  const ExportOptions& o = rc.export_opts;
  if (o.split != "all" && o.split != "train" && o.split != "test") {
    throw ConfigError("export.split must be all, train or test");
  }
  if (o.window < 1 || o.window > rc.data.frames) throw ConfigError("export.window must be in [1, frames]");
  if (o.stride < 1) throw ConfigError("export.stride must be >= 1");

  if (j.contains("paths")) {
    const json& p = j["paths"];
    require_known_keys(p, {"dataset", "checkpoint"}, "paths");
    try {
      if (p.contains("dataset")) rc.dataset_path = resolve(p["dataset"], base_dir);
      if (p.contains("checkpoint")) rc.checkpoint_path = resolve(p["checkpoint"], base_dir);
    } catch (const json::exception&) {
      throw ConfigError("paths: entries must be strings");
    }
  }
  return rc;
}

RunConfig load_run_config(const fs::path& file) {
  std::ifstream is(file);
  if (!is) throw IoError("cannot open config " + file.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + file.string() + ": " + e.what());
  }
  return parse_run_config(j, file.parent_path());
}

}  // namespace rcmcl::cli
