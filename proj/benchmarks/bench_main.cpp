#include <benchmark/benchmark.h>

#include "rcmcl/data.hpp"
#include "rcmcl/model.hpp"
#include "rcmcl/ops.hpp"
#include "rcmcl/rng.hpp"
#include "rcmcl/trainer.hpp"

namespace {

using namespace rcmcl;

DenseMatrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  SplitRng rng(seed);
  DenseMatrix m(r, c);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const DenseMatrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

struct Fixture {
  ModelDims dims;
  LabeledSet data;
  ModelParams params;
  Fixture() {
    GeneratorSpec spec;
    data = generate(spec, 8).samples;  // 80 samples
    dims.shape = spec.shape();
    dims.num_classes = spec.num_classes;
    params = init_params(dims, 1);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_Encode(benchmark::State& state) {
  const Fixture& f = fixture();
  const auto m = static_cast<Modality>(state.range(0));
  const DenseMatrix& block = f.data.inputs.block(m);
  for (auto _ : state) benchmark::DoNotOptimize(encode(f.params, m, block));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(block.rows()));
}
BENCHMARK(BM_Encode)->DenseRange(0, 2)->ArgName("modality");

void BM_PretrainEpoch(benchmark::State& state) {
  const Fixture& f = fixture();
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.warmup_epochs = 0;
  cfg.batch_size = 64;
  for (auto _ : state) benchmark::DoNotOptimize(pretrain(f.data.inputs, f.params, cfg).params);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.data.size()));
}
BENCHMARK(BM_PretrainEpoch)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
