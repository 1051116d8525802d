#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "rcmcl/checkpoint.hpp"
#include "rcmcl/dataset_io.hpp"
#include "rcmcl/error.hpp"
#include "rcmcl/json_io.hpp"

using namespace rcmcl;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("rcmcl-io-" + std::to_string(SplitRng(reinterpret_cast<std::uintptr_t>(this))
                                                                          .child("tmp")
                                                                          .next_u64()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

}  // namespace

TEST_CASE("dataset round trip with split") {
  TempDir tmp;
  GeneratorSpec spec;
  spec.num_classes = 3;
  const Dataset ds = generate(spec, 5);
  DatasetSplit sp{0.8, 11, split_indices(ds.samples, 0.8, 11)};
  save_dataset(tmp.path / "data", ds, sp, {{"note", "x"}});
  CHECK_FALSE(fs::exists(tmp.path / "data.tmp"));

  const StoredDataset back = load_dataset(tmp.path / "data");
  CHECK(back.dataset.spec == spec);
  CHECK(back.dataset.samples.inputs.rgbd == ds.samples.inputs.rgbd);
  CHECK(back.dataset.samples.inputs.skeleton == ds.samples.inputs.skeleton);
  CHECK(back.dataset.samples.inputs.points == ds.samples.inputs.points);
  CHECK(back.dataset.samples.inputs.ids == ds.samples.inputs.ids);
  CHECK(back.dataset.samples.labels == ds.samples.labels);
  REQUIRE(back.split.has_value());
  CHECK(back.split->ids.train == sp.ids.train);
  CHECK(back.split->ids.test == sp.ids.test);
  CHECK(back.manifest["note"] == "x");
  CHECK(back.train().size() + back.test().size() == ds.samples.size());
  CHECK(back.test().labels == split(ds.samples, 0.8, 11).second.labels);

  save_dataset(tmp.path / "nosplit", ds, std::nullopt);
  const StoredDataset ns = load_dataset(tmp.path / "nosplit");
  CHECK_FALSE(ns.split.has_value());
  CHECK_THROWS_AS((void)ns.train(), ConfigError);
}

TEST_CASE("dataset loading failures are I/O errors") {
  TempDir tmp;
  CHECK_THROWS_AS((void)load_dataset(tmp.path / "missing"), IoError);
  GeneratorSpec spec;
  spec.num_classes = 2;
  save_dataset(tmp.path / "d", generate(spec, 3), std::nullopt);
  {
    std::ofstream os(tmp.path / "d" / "labels.bin", std::ios::binary | std::ios::trunc);
    os << "XXXX";
  }
  CHECK_THROWS_AS((void)load_dataset(tmp.path / "d"), IoError);
  {
    std::ofstream os(tmp.path / "d" / "manifest.json", std::ios::trunc);
    os << "{not json";
  }
  CHECK_THROWS_AS((void)load_dataset(tmp.path / "d"), IoError);
}

TEST_CASE("checkpoint round trip") {
  TempDir tmp;
  const ModelParams p = fixture::generic_params(fixture::tiny_dims(), 4);
  save_checkpoint(tmp.path / "ck", p, {{"seed", 4}, {"config_digest", "abc"}});
  const Checkpoint ck = load_checkpoint(tmp.path / "ck");
  CHECK(tensors_equal(ck.params, p));
  CHECK(ck.params.dims == p.dims);
  CHECK(ck.manifest["seed"] == 4);
  CHECK(ck.manifest["config_digest"] == "abc");

  // Overwrite keeps the directory whole.
  const ModelParams q = fixture::generic_params(fixture::tiny_dims(), 5);
  save_checkpoint(tmp.path / "ck", q);
  CHECK(tensors_equal(load_checkpoint(tmp.path / "ck").params, q));
  CHECK_FALSE(fs::exists(tmp.path / "ck.tmp"));

  // A failing writer leaves the previous contents in place.
  CHECK_THROWS_AS(write_directory_atomically(tmp.path / "ck", [](const fs::path&) { throw IoError("boom"); }), IoError);
  CHECK(tensors_equal(load_checkpoint(tmp.path / "ck").params, q));

  fs::remove(tmp.path / "ck" / "cls.w.rcm");
  CHECK_THROWS_AS((void)load_checkpoint(tmp.path / "ck"), IoError);
  CHECK_THROWS_AS((void)load_checkpoint(tmp.path / "nothing"), IoError);
}

TEST_CASE("checkpoint rejects tensors of the wrong shape") {
  TempDir tmp;
  const ModelParams p = fixture::generic_params(fixture::tiny_dims(), 1);
  save_checkpoint(tmp.path / "ck", p);
  save_matrix(tmp.path / "ck" / "gate.b.rcm", DenseMatrix(1, 4));
  try {
    (void)load_checkpoint(tmp.path / "ck");
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("gate.b") != std::string::npos);
  }
}

TEST_CASE("atomic text write") {
  TempDir tmp;
  write_text_atomically(tmp.path / "a.csv", "x\n");
  write_text_atomically(tmp.path / "a.csv", "y\n");
  std::ifstream is(tmp.path / "a.csv");
  std::string s((std::istreambuf_iterator<char>(is)), {});
  CHECK(s == "y\n");
  CHECK_FALSE(fs::exists(tmp.path / "a.csv.tmp"));
}

TEST_CASE("config json round trips and rejects unknown keys") {
  GeneratorSpec g;
  g.num_classes = 6;
  g.nuisance_scale = 1.25;
  CHECK(generator_spec_from_json(to_json(g)) == g);
  ModelDims d = fixture::tiny_dims();
  CHECK(model_dims_from_json(to_json(d)) == d);
  TrainConfig t;
  t.epochs = 7;
  t.warmup_epochs = 2;
  t.fusion = FusionMode::kAverage;
  t.loss.lambda_fuse = 0.0;
  t.augment.jitter = 0.5;
  CHECK(train_config_from_json(to_json(t)) == t);
  CorruptionGrid c;
  c.sigmas = {0.2};
  CHECK(corruption_grid_from_json(to_json(c)).sigmas == c.sigmas);

  CHECK_THROWS_AS((void)generator_spec_from_json({{"num_clases", 3}}), ConfigError);
  CHECK_THROWS_AS((void)train_config_from_json({{"loss", {{"lambda_x", 1.0}}}}), ConfigError);
  CHECK_THROWS_AS((void)train_config_from_json({{"epochs", "ten"}}), ConfigError);
  CHECK_THROWS_AS((void)train_config_from_json(nlohmann::json::array()), ConfigError);
  CHECK_THROWS_AS((void)loss_config_from_json({{"tau", -1.0}}), ConfigError);

  // Partial objects override only what they name.
  const TrainConfig partial = train_config_from_json({{"batch_size", 32}});
  TrainConfig want;
  want.batch_size = 32;
  CHECK(partial == want);
}

TEST_CASE("config digest") {
  const nlohmann::json a = {{"b", 1}, {"a", {{"y", 2.5}, {"x", "s"}}}};
  const nlohmann::json b = nlohmann::json::parse(R"({"a":{"x":"s","y":2.5},"b":1})");
  CHECK(json_digest(a) == json_digest(b));
  CHECK(json_digest(a).size() == 16);
  CHECK(json_digest(a) != json_digest({{"b", 2}, {"a", {{"y", 2.5}, {"x", "s"}}}}));
  // FNV-1a 64 of "{}".
  CHECK(json_digest(nlohmann::json::object()) == "08f44b07b5901a25");
}
