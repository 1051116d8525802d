#include "commands.hpp"

#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "rcmcl/checkpoint.hpp"
#include "rcmcl/dataset_io.hpp"
#include "rcmcl/error.hpp"
#include "rcmcl/json_io.hpp"

namespace rcmcl::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kReportVersion = 1;

json stamp(const Context& ctx, std::string_view command) {
  return {{"version", kReportVersion},
          {"command", command},
          {"config_digest", ctx.cfg.digest()},
          {"seed", ctx.cfg.seed}};
}

void write_json(const fs::path& file, const json& j) {
  write_text_atomically(file, j.dump(2) + "\n");
  spdlog::info("wrote {}", file.string());
}

void write_csv(const fs::path& file, const std::string& text) {
  write_text_atomically(file, text);
  spdlog::info("wrote {}", file.string());
}

void write_run_manifest(const Context& ctx, std::string_view command, const std::vector<std::string>& outputs) {
  json j = stamp(ctx, command);
  j["outputs"] = outputs;
  j["config"] = ctx.cfg.canonical();
  write_text_atomically(ctx.out / (std::string(command) + ".run.json"), j.dump(2) + "\n");
}

void refuse_or_warn(const Context& ctx, const std::string& what, const std::string& found,
                    const std::string& expected) {
  if (found == expected) return;
  const std::string msg = what + " digest " + found + " does not match the config (" + expected + ")";
  if (!ctx.allow_digest_mismatch) throw ConfigError(msg + "; pass --allow-digest-mismatch to use it anyway");
  spdlog::warn("{}; continuing because of --allow-digest-mismatch", msg);
}

fs::path dataset_dir(const Context& ctx) {
  if (ctx.data_dir) return *ctx.data_dir;
  if (ctx.cfg.dataset_path) return *ctx.cfg.dataset_path;
  return ctx.out / "dataset";
}

StoredDataset open_dataset(const Context& ctx) {
  const fs::path dir = dataset_dir(ctx);
  spdlog::info("loading dataset {}", dir.string());
  StoredDataset ds = load_dataset(dir);
  refuse_or_warn(ctx, "dataset", ds.manifest.value("data_digest", std::string("none")), ctx.cfg.data_digest());
  if (!ds.split) throw ConfigError("dataset " + dir.string() + " has no train/test split");
  spdlog::debug("dataset: {} samples, {} train / {} test", ds.dataset.samples.size(), ds.split->ids.train.size(),
                ds.split->ids.test.size());
  return ds;
}

Checkpoint open_checkpoint(const Context& ctx) {
  fs::path dir = ctx.out / "checkpoint";
  if (ctx.cfg.checkpoint_path) dir = *ctx.cfg.checkpoint_path;
  if (ctx.checkpoint_dir) dir = *ctx.checkpoint_dir;
  spdlog::info("loading checkpoint {}", dir.string());
  Checkpoint ck = load_checkpoint(dir);
  refuse_or_warn(ctx, "checkpoint", ck.manifest.value("config_digest", std::string("none")), ctx.cfg.digest());
  if (!(ck.params.dims == ctx.cfg.model)) throw ConfigError("checkpoint model dims differ from the config");
  return ck;
}

json checkpoint_meta(const Context& ctx, std::string_view stage) {
  json j = stamp(ctx, stage);
  j.erase("command");
  j.erase("version");
  j["stage"] = stage;
  j["data_digest"] = ctx.cfg.data_digest();
  j["config"] = ctx.cfg.canonical();
  return j;
}

std::string num(double v) { return fmt::format("{}", v); }

std::string history_csv(const std::vector<EpochLosses>& history) {
  std::string s = "epoch,l_cm,l_im,l_deg,l_fusion,l_total,lr\n";
  for (const EpochLosses& e : history) {
    s += fmt::format("{},{},{},{},{},{},{}\n", e.epoch, num(e.mean.cross_modal), num(e.mean.intra_modal),
                     num(e.mean.degradation), num(e.mean.fusion), num(e.total), num(e.lr));
  }
  return s;
}

// Frozen means every tensor outside the classifier is bit-identical.
bool frozen_unchanged(const ModelParams& before, const ModelParams& after) {
  const auto a = named_tensors(before, true);
  const auto b = named_tensors(after, true);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].first.rfind("cls.", 0) == 0) continue;
    if (!(*a[i].second == *b[i].second)) return false;
  }
  return true;
}

json supervised_report(const Context& ctx, std::string_view command, const SupervisedResult& r,
                       const StoredDataset& ds) {
  json j = stamp(ctx, command);
  j["fusion"] = fusion_mode_name(ctx.cfg.train.fusion);
  j["train_accuracy"] = r.train_accuracy;
  j["test_accuracy"] = r.test_accuracy;
  j["n_train"] = ds.split->ids.train.size();
  j["n_test"] = ds.split->ids.test.size();
  return j;
}

SupervisedResult probe_checked(const Context& ctx, const ModelParams& params, const StoredDataset& ds) {
  const SupervisedResult r = linear_probe(params, ds.train(), ds.test(), ctx.cfg.train_config());
  if (!frozen_unchanged(params, r.params)) throw NumericError("probe: frozen encoder or gate parameters changed");
  spdlog::info("linear probe: train {:.2f}% test {:.2f}%", r.train_accuracy, r.test_accuracy);
  return r;
}

}  // namespace

void cmd_gen_data(const Context& ctx) {
  const RunConfig& c = ctx.cfg;
  spdlog::info("generating {} x {} samples", c.data.num_classes, c.dataset.n_per_class);
  const Dataset ds = generate(c.data, c.dataset.n_per_class);
  const DatasetSplit sp{c.dataset.train_fraction, c.dataset.split_seed,
                        split_indices(ds.samples, c.dataset.train_fraction, c.dataset.split_seed)};
  json extra = stamp(ctx, "gen-data");
  extra.erase("command");
  extra.erase("version");
  extra["data_digest"] = c.data_digest();
  save_dataset(ctx.out / "dataset", ds, sp, extra);
  spdlog::info("wrote {}", (ctx.out / "dataset").string());
  write_run_manifest(ctx, "gen-data", {"dataset"});
}

void cmd_pretrain(const Context& ctx) {
  const StoredDataset ds = open_dataset(ctx);
  const LabeledSet train = ds.train();
  const TrainConfig tc = ctx.cfg.train_config();
  spdlog::info("pre-training on {} samples for {} epochs (fusion {})", train.size(), tc.epochs,
               fusion_mode_name(tc.fusion));
  const PretrainResult r = pretrain(train.inputs, init_params(ctx.cfg.model, ctx.cfg.seed), tc, [](const EpochLosses& e) {
    spdlog::info("epoch {:3d}  total {:.5f}  cm {:.4f}  im {:.4f}  deg {:.4f}  fuse {:.4f}  lr {:.2e}", e.epoch,
                 e.total, e.mean.cross_modal, e.mean.intra_modal, e.mean.degradation, e.mean.fusion, e.lr);
  });
  save_checkpoint(ctx.out / "checkpoint", r.params, checkpoint_meta(ctx, "pretrain"));
  spdlog::info("wrote {}", (ctx.out / "checkpoint").string());
  write_csv(ctx.out / "history.csv", history_csv(r.history));
  write_run_manifest(ctx, "pretrain", {"checkpoint", "history.csv"});
}

void cmd_probe(const Context& ctx) {
  const Checkpoint ck = open_checkpoint(ctx);
  const StoredDataset ds = open_dataset(ctx);
  const SupervisedResult r = probe_checked(ctx, ck.params, ds);
  json rep = supervised_report(ctx, "probe", r, ds);
  rep["frozen_bytes_unchanged"] = true;
  save_checkpoint(ctx.out / "probe_checkpoint", r.params, checkpoint_meta(ctx, "probe"));
  write_json(ctx.out / "probe.json", rep);
  write_run_manifest(ctx, "probe", {"probe.json", "probe_checkpoint"});
}

void cmd_finetune(const Context& ctx) {
  const Checkpoint ck = open_checkpoint(ctx);
  const StoredDataset ds = open_dataset(ctx);
  const SupervisedResult r = full_finetune(ck.params, ds.train(), ds.test(), ctx.cfg.train_config());
  spdlog::info("fine-tune: train {:.2f}% test {:.2f}%", r.train_accuracy, r.test_accuracy);
  save_checkpoint(ctx.out / "finetune_checkpoint", r.params, checkpoint_meta(ctx, "finetune"));
  write_json(ctx.out / "finetune.json", supervised_report(ctx, "finetune", r, ds));
  write_run_manifest(ctx, "finetune", {"finetune.json", "finetune_checkpoint"});
}

void cmd_robustness(const Context& ctx) {
  const Checkpoint ck = open_checkpoint(ctx);
  const StoredDataset ds = open_dataset(ctx);
  ModelParams params = ck.params;
  if (ck.manifest.value("stage", std::string()) == "pretrain") {
    spdlog::info("checkpoint is pre-trained only; fitting the linear probe first");
    params = probe_checked(ctx, params, ds).params;
  }
  const LabeledSet test = ds.test();
  const FusionMode mode = ctx.cfg.train.fusion;

  RobustnessReport drop = run_dropout_suite(params, test, mode, ctx.cfg.seed);
  drop.config_digest = ctx.cfg.digest();
  if (ctx.baseline_report) {
    std::ifstream is(*ctx.baseline_report);
    if (!is) throw IoError("cannot open baseline report " + ctx.baseline_report->string());
    json bj;
    try {
      bj = json::parse(is);
    } catch (const json::parse_error& e) {
      throw IoError("baseline report: " + std::string(e.what()));
    }
    const RobustnessReport base = report_from_json(bj);
    drop.rgs = rgs(base.rdp_headline, drop.rdp_headline);
  }
  for (const ScenarioResult& s : drop.scenarios) {
    spdlog::info("{:8s} {:6.2f}%  rdp {:6.2f}", s.scenario, s.top1_accuracy, drop.rdp.at(s.scenario));
  }
  RobustnessReport corr = run_corruption_suite(params, test, mode, ctx.cfg.grid, ctx.cfg.seed);
  corr.config_digest = drop.config_digest;
  spdlog::info("clean {:.2f}%  dual-dropout rdp {:.2f}  corruption average rdp {:.2f}", drop.clean.top1_accuracy,
               drop.rdp_headline, *corr.average_rdp);

  write_json(ctx.out / "robustness_dropout.json", to_json(drop));
  write_json(ctx.out / "robustness_corruption.json", to_json(corr));
  write_csv(ctx.out / "dropout_table.csv", dropout_table_csv(drop));
  write_csv(ctx.out / "corruption_table.csv", corruption_table_csv(corr));
  write_run_manifest(ctx, "robustness",
                     {"robustness_dropout.json", "robustness_corruption.json", "dropout_table.csv",
                      "corruption_table.csv"});
}

void cmd_ablate(const Context& ctx) {
  const StoredDataset ds = open_dataset(ctx);
  const RunConfig& c = ctx.cfg;
  spdlog::info("ablation: {} configs x {} seeds", c.ablation_configs.size(), c.ablation_seeds.size());
  const auto rows = run_ablation_matrix(
      ds.train(), ds.test(), c.model, c.train_config(), c.ablation_seeds, c.ablation_configs,
      [](AblationConfig cfg, std::uint64_t seed, const AblationCell& cell) {
        spdlog::info("config {} ({}) seed {}: clean {:.2f}%  rdp {:.2f}", static_cast<int>(cfg), ablation_label(cfg),
                     seed, cell.clean_accuracy, cell.rdp_headline);
      });
  json rep = stamp(ctx, "ablate");
  rep["rows"] = ablation_to_json(rows);
  write_json(ctx.out / "ablation.json", rep);
  write_csv(ctx.out / "ablation.csv", ablation_table_csv(rows));
  write_run_manifest(ctx, "ablate", {"ablation.json", "ablation.csv"});
}

void cmd_export_embeddings(const Context& ctx) {
  const Checkpoint ck = open_checkpoint(ctx);
  const StoredDataset ds = open_dataset(ctx);
  const ExportOptions& o = ctx.cfg.export_opts;
  const ModelParams& p = ck.params;
  const LabeledSet set = o.split == "train" ? ds.train() : o.split == "test" ? ds.test() : ds.dataset.samples;

  std::string emb = "sample_id,modality,label";
  for (std::size_t k = 0; k < p.dims.proj_dim; ++k) emb += fmt::format(",h{}", k);
  emb += '\n';
  const std::size_t chunk = 256;
  for (std::size_t start = 0; start < set.size(); start += chunk) {
    std::vector<std::size_t> rows(std::min(chunk, set.size() - start));
    std::iota(rows.begin(), rows.end(), start);
    const ModalBatch b = set.inputs.subset(rows);
    DenseMatrix h[kNumModalities];
    for (Modality m : kModalities) h[index_of(m)] = project(p.head(m), encode(p, m, b.block(m)));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (Modality m : kModalities) {
        emb += fmt::format("{},{},{}", b.ids[i], modality_letter(m), set.labels[rows[i]]);
        for (double v : h[index_of(m)].row(i)) emb += "," + num(v);
        emb += '\n';
      }
    }
  }

  const LabeledSet test = ds.test();
  std::optional<DropoutSchedule> cut;
  std::string cut_name;
  if (o.drop_modality) {
    cut = DropoutSchedule{modality_from_letter(*o.drop_modality), o.drop_from_frame};
    cut_name = fmt::format("drop:{}@{}", *o.drop_modality, o.drop_from_frame);
  }
  std::string traces = "sample_id,label,scenario,window_start,g_r,g_s,g_p,degenerate\n";
  for (std::size_t i = 0; i < std::min(o.trace_samples, test.size()); ++i) {
    const Sample s = test.inputs.sample(i);
    const auto emit = [&](const std::string& scenario, const DropoutSchedule* sched) {
      for (const GateTracePoint& pt : gate_trace(s, p, o.window, o.stride, sched)) {
        const auto& g = pt.output.gates;
        traces += fmt::format("{},{},{},{},{},{},{},{}\n", test.inputs.ids[i], test.labels[i], scenario,
                              pt.window_start, num(g[0]), num(g[1]), num(g[2]), pt.output.degenerate ? 1 : 0);
      }
    };
    emit("clean", nullptr);
    if (cut) emit(cut_name, &*cut);
  }

  write_csv(ctx.out / "embeddings.csv", emb);
  write_csv(ctx.out / "gate_traces.csv", traces);
  write_run_manifest(ctx, "export-embeddings", {"embeddings.csv", "gate_traces.csv"});
}

}  // namespace rcmcl::cli
