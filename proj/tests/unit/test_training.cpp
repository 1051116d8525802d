#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "rcmcl/augment.hpp"
#include "rcmcl/error.hpp"
#include "rcmcl/optim.hpp"
#include "rcmcl/trainer.hpp"

using namespace rcmcl;

namespace {

Dataset small_dataset(std::size_t per_class = 8, int classes = 4) {
  GeneratorSpec s;
  s.num_classes = classes;
  return generate(s, per_class);
}

TrainConfig quick_config(std::size_t epochs = 3) {
  TrainConfig c;
  c.epochs = epochs;
  c.warmup_epochs = 1;
  c.batch_size = 16;
  c.base_lr = 2e-3;
  c.probe_epochs = 20;
  c.finetune_epochs = 10;
  c.seed = 5;
  return c;
}

ModelDims dims_for(const Dataset& ds) {
  ModelDims d;
  d.shape = ds.spec.shape();
  d.num_classes = ds.spec.num_classes;
  return d;
}

double joint_distance(std::span<const double> frame, std::size_t i, std::size_t j) {
  double s = 0.0;
  for (std::size_t c = 0; c < 3; ++c) s += (frame[3 * i + c] - frame[3 * j + c]) * (frame[3 * i + c] - frame[3 * j + c]);
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("adamw: zero gradient and zero decay leave parameters unchanged") {
  SplitRng rng(1);
  DenseMatrix p = oracle::random_matrix(3, 4, rng);
  const DenseMatrix before = p, g(3, 4);
  DenseMatrix* ps[] = {&p};
  const DenseMatrix* gs[] = {&g};
  OptimState st;
  AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  for (int i = 0; i < 10; ++i) adamw_step(ps, gs, st, cfg, 1e-2);
  CHECK(p == before);
  CHECK(st.step == 10);
}

TEST_CASE("adamw: constant gradient gives steps of size lr") {
  DenseMatrix p(1, 2), g = DenseMatrix::from_rows({{0.3, -7.0}});
  DenseMatrix* ps[] = {&p};
  const DenseMatrix* gs[] = {&g};
  OptimState st;
  AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  const double lr = 1e-3;
  DenseMatrix prev = p;
  for (int i = 0; i < 500; ++i) {
    prev = p;
    adamw_step(ps, gs, st, cfg, lr);
  }
  for (std::size_t k = 0; k < 2; ++k) CHECK(std::abs(std::abs(p[k] - prev[k]) - lr) < 0.01 * lr);
}

TEST_CASE("adamw: single scalar matches a hand-stepped reference") {
  const AdamWConfig cfg{0.9, 0.999, 1e-8, 0.05};
  const double lr = 0.01;
  DenseMatrix p(1, 1, 1.5), g(1, 1);
  DenseMatrix* ps[] = {&p};
  const DenseMatrix* gs[] = {&g};
  OptimState st;
  double x = 1.5, m = 0.0, v = 0.0;
  for (int t = 1; t <= 10; ++t) {
    const double grad = std::sin(0.7 * t) + 0.1 * x;
    g[0] = grad;
    adamw_step(ps, gs, st, cfg, lr);
    m = 0.9 * m + 0.1 * grad;
    v = 0.999 * v + 0.001 * grad * grad;
    const double mh = m / (1.0 - std::pow(0.9, t)), vh = v / (1.0 - std::pow(0.999, t));
    x = x - lr * 0.05 * x - lr * mh / (std::sqrt(vh) + 1e-8);
    CHECK(std::abs(p[0] - x) < 1e-12);
  }
}

TEST_CASE("adamw: shape mismatch") {
  DenseMatrix p(2, 2), g(2, 3);
  DenseMatrix* ps[] = {&p};
  const DenseMatrix* gs[] = {&g};
  OptimState st;
  CHECK_THROWS_AS(adamw_step(ps, gs, st, AdamWConfig{}, 1e-3), ShapeError);
}

TEST_CASE("learning-rate schedule") {
  const LrSchedule s{1e-3, 100.0, 10.0};
  CHECK(lr_at(0.0, s) == 0.0);
  CHECK(lr_at(0.05, s) == doctest::Approx(0.5e-3));
  CHECK(lr_at(0.1, s) == doctest::Approx(1e-3).epsilon(1e-15));
  CHECK(lr_at(1.0, s) < 1e-6);
  CHECK(lr_at(99.0 / 100.0, s) < 1e-3 * 1e-3 * 1e3);
  CHECK(std::abs(lr_at(0.55, s) - 0.5e-3) < 1e-9);
  for (double f = 0.1; f < 1.0; f += 0.05) CHECK(lr_at(f + 0.05, s) <= lr_at(f, s) + 1e-18);
}

TEST_CASE("augmentation") {
  const Dataset ds = small_dataset(2);
  const DataShape shape = ds.samples.inputs.shape;
  const Sample s = ds.samples.inputs.sample(0);

  SplitRng rng(3);
  for (Modality m : kModalities) {
    const Sample out = augment(s, m, rng, AugmentParams::identity(), shape);
    CHECK(out.rgbd == s.rgbd);
    CHECK(out.skeleton == s.skeleton);
    CHECK(out.points == s.points);
  }

  AugmentParams rot_only = AugmentParams::identity();
  rot_only.rotation_deg = 30.0;
  const Sample r = augment(s, Modality::kSkeleton, rng, rot_only, shape);
  CHECK_FALSE(r.skeleton == s.skeleton);
  for (std::size_t t = 0; t < shape.frames; ++t)
    for (std::size_t i = 0; i < shape.joints; ++i)
      for (std::size_t j = i + 1; j < shape.joints; ++j) {
        CHECK(std::abs(joint_distance(r.skeleton.row(t), i, j) - joint_distance(s.skeleton.row(t), i, j)) < 1e-9);
      }
  // Yaw about the vertical axis leaves the y coordinate alone.
  for (std::size_t t = 0; t < shape.frames; ++t)
    for (std::size_t i = 0; i < shape.joints; ++i) CHECK(r.skeleton(t, 3 * i + 1) == s.skeleton(t, 3 * i + 1));

  SplitRng a = SplitRng(1).child("view1"), b = SplitRng(1).child("view2");
  for (Modality m : kModalities) {
    const Sample va = augment(s, m, a, AugmentParams{}, shape), vb = augment(s, m, b, AugmentParams{}, shape);
    const bool same = va.rgbd == vb.rgbd && va.skeleton == vb.skeleton && va.points == vb.points;
    CHECK_FALSE(same);
  }

  ModalBatch batch = ds.samples.inputs;
  batch.availability[0] = {true, false, true};
  std::fill(batch.skeleton.row(0).begin(), batch.skeleton.row(0).end(), 0.0);
  const ModalBatch aug = augment_batch(batch, SplitRng(4), AugmentParams{});
  CHECK(std::all_of(aug.skeleton.row(0).begin(), aug.skeleton.row(0).end(), [](double v) { return v == 0.0; }));
  CHECK_FALSE(aug.points == batch.points);
  AugmentParams bad;
  bad.feature_drop = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.warmup_epochs = c.epochs;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.batch_size = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.degrade_prob = 1.2;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(fusion_mode_from_name("amg") == FusionMode::kAdaptive);
  CHECK(fusion_mode_from_name("average") == FusionMode::kAverage);
  CHECK_THROWS_AS((void)fusion_mode_from_name("max"), ConfigError);
}

TEST_CASE("pretrain with all weights zero is a no-op") {
  const Dataset ds = small_dataset();
  const ModelParams init = init_params(dims_for(ds), 1);
  TrainConfig c = quick_config(2);
  c.loss.lambda_cm = c.loss.lambda_im = c.loss.lambda_deg = c.loss.lambda_fuse = 0.0;
  c.weight_decay = 0.0;
  const PretrainResult r = pretrain(ds.samples.inputs, init, c);
  CHECK(tensors_equal(r.params, init));
  CHECK(r.history.size() == 2);
}

TEST_CASE("pretrain is deterministic and label-blind") {
  const Dataset ds = small_dataset();
  const ModelParams init = init_params(dims_for(ds), 2);
  const TrainConfig c = quick_config(2);
  const PretrainResult a = pretrain(ds.samples.inputs, init, c);
  const PretrainResult b = pretrain(ds.samples.inputs, init, c);
  CHECK(tensors_equal(a.params, b.params));
  REQUIRE(a.history.size() == 2);
  CHECK(a.history[1].total == b.history[1].total);
  for (const EpochLosses& e : a.history) {
    CHECK(std::isfinite(e.total));
    CHECK(e.mean.cross_modal > 0.0);
    CHECK(e.mean.intra_modal > 0.0);
    CHECK(e.mean.degradation > 0.0);
    CHECK(e.mean.fusion > 0.0);
  }
  CHECK(a.history[0].lr == doctest::Approx(c.base_lr));
  CHECK(a.history[1].lr < 1e-12);

  // Pre-training takes inputs only; relabelling the set cannot reach it.
  LabeledSet relabelled = ds.samples;
  std::reverse(relabelled.labels.begin(), relabelled.labels.end());
  CHECK(tensors_equal(pretrain(relabelled.inputs, init, c).params, a.params));

  TrainConfig other = c;
  other.seed = 6;
  CHECK_FALSE(tensors_equal(pretrain(ds.samples.inputs, init, other).params, a.params));
}

TEST_CASE("pretrain aborts with context on non-finite input") {
  Dataset ds = small_dataset();
  ds.samples.inputs.rgbd[3] = std::nan("");
  const ModelParams init = init_params(dims_for(ds), 2);
  try {
    (void)pretrain(ds.samples.inputs, init, quick_config(2));
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
  }
}

TEST_CASE("pretrain loss falls over training") {
  GeneratorSpec spec;
  const Dataset ds = generate(spec, 25);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    TrainConfig c = quick_config(8);
    c.batch_size = 64;
    c.seed = seed;
    const PretrainResult r = pretrain(ds.samples.inputs, init_params(dims_for(ds), seed), c);
    INFO("seed " << seed << " first " << r.history.front().total << " last " << r.history.back().total);
    CHECK(r.history.back().total < r.history.front().total);
  }
}

TEST_CASE("linear probe trains only the classifier") {
  const Dataset ds = small_dataset(10);
  auto [train, test] = split(ds.samples, 0.8, 1);
  const ModelParams init = init_params(dims_for(ds), 3);
  const TrainConfig c = quick_config();
  const SupervisedResult r = linear_probe(init, train, test, c);
  CHECK(tensors_equal(r.params, init, "enc_"));
  CHECK(tensors_equal(r.params, init, "proj_"));
  CHECK(tensors_equal(r.params, init, "gate."));
  CHECK(tensors_equal(r.params, init, "dec_s"));
  CHECK_FALSE(tensors_equal(r.params, init, "cls."));
  CHECK(r.test_accuracy == evaluate_accuracy(r.params, test, c.fusion));
  const SupervisedResult again = linear_probe(init, train, test, c);
  CHECK(again.test_accuracy == r.test_accuracy);
  CHECK(tensors_equal(again.params, r.params));
  CHECK(r.train_accuracy > 100.0 / 4);
  CHECK_THROWS_AS((void)linear_probe(init, train, test.subset({}), c), ConfigError);
}

TEST_CASE("full fine-tune") {
  const Dataset ds = small_dataset(10);
  auto [train, test] = split(ds.samples, 0.8, 1);
  const ModelParams init = init_params(dims_for(ds), 4);
  TrainConfig c = quick_config();
  TrainConfig frozen = c;
  frozen.finetune_lr = 0.0;
  const SupervisedResult z = full_finetune(init, train, test, frozen);
  CHECK(tensors_equal(z.params, init));
  CHECK(z.test_accuracy == evaluate_accuracy(init, test, c.fusion));

  const SupervisedResult a = full_finetune(init, train, test, c), b = full_finetune(init, train, test, c);
  CHECK(tensors_equal(a.params, b.params));
  CHECK_FALSE(tensors_equal(a.params, init, "gate."));
  CHECK_FALSE(tensors_equal(a.params, init, "enc_s"));
}

TEST_CASE("fine-tune is at least as accurate as the probe on the same split") {
  GeneratorSpec spec;
  const Dataset ds = generate(spec, 20);
  auto [train, test] = split(ds.samples, 0.75, 2);
  double ft = 0.0, lp = 0.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const ModelParams init = init_params(dims_for(ds), seed);
    TrainConfig c = quick_config();
    c.seed = seed;
    c.batch_size = 32;
    c.finetune_epochs = 20;
    c.probe_epochs = 20;
    ft += full_finetune(init, train, test, c).test_accuracy;
    lp += linear_probe(init, train, test, c).test_accuracy;
  }
  MESSAGE("mean fine-tune " << ft / 3 << " vs probe " << lp / 3);
  CHECK(ft >= lp);
}

TEST_CASE("accuracy helper") {
  const std::vector<int> p = {1, 2, 3, 4}, y = {1, 2, 0, 4};
  CHECK(accuracy_percent(p, y) == 75.0);
}
