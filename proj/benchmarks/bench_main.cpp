#include <benchmark/benchmark.h>

#include <filesystem>

#include "gesturegan/conditioning.hpp"
#include "gesturegan/metrics.hpp"
#include "gesturegan/rng.hpp"
#include "gesturegan/synthetic_corpus.hpp"
#include "gesturegan/training.hpp"

using namespace gesturegan;

namespace {

nn::Tensor noise(nn::Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  nn::Tensor t(shape);
  for (float& v : t.values()) v = static_cast<float>(2 * rng.uniform() - 1);
  return t;
}

void BM_Conv2dForwardBackward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const nn::Var x = nn::Var::parameter(noise({8, c, 32, 32}, 1));
  const nn::Var w = nn::Var::parameter(noise({2 * c, c, 4, 4}, 2));
  const nn::Var b = nn::Var::parameter(nn::Tensor({1, 2 * c, 1, 1}));
  for (auto _ : state) {
    const nn::Var y = nn::conv2d(x, w, b, {2, 1});
    nn::backward(nn::mean(y));
    benchmark::DoNotOptimize(w.grad().data());
  }
}
BENCHMARK(BM_Conv2dForwardBackward)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_GeneratorForward(benchmark::State& state) {
  GeneratorConfig cfg;
  cfg.base_width = static_cast<int>(state.range(0));
  const Generator g(cfg, 3);
  const nn::Tensor image = noise({1, 3, 64, 64}, 4);
  const nn::Tensor map({1, 1, 64, 64}, 0.0f);
  for (auto _ : state) benchmark::DoNotOptimize(translate(g, image, map, 5).data());
}
BENCHMARK(BM_GeneratorForward)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_Rasterize(benchmark::State& state) {
  const auto [image, pose] = render_synthetic_hand(SyntheticCorpusOptions{}, 0, 0, 0);
  const auto variant = static_cast<ConditioningVariant>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(rasterize(pose, variant).pixels.data());
}
BENCHMARK(BM_Rasterize)->DenseRange(0, 3);

void BM_DiscreteFrechet(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(6);
  std::vector<double> a(n), b(n);
  for (auto& v : a) v = rng.uniform();
  for (auto& v : b) v = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(metrics::discrete_frechet(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_DiscreteFrechet)->RangeMultiplier(4)->Range(64, 4096)->Complexity(benchmark::oNSquared);

void BM_TrainStep(benchmark::State& state) {
  const auto dir = std::filesystem::temp_directory_path() / "gesturegan_bench_corpus";
  const auto paths = write_synthetic_corpus(dir, SyntheticCorpusOptions{});
  const Corpus corpus = load_corpus(paths.manifest, paths.annotations);
  TrainConfig cfg;
  cfg.generator.base_width = static_cast<int>(state.range(0));
  cfg.discriminator.base_width = static_cast<int>(state.range(0));
  cfg.epochs = 1000000;
  Trainer trainer(cfg, enumerate_pairs(corpus.records), {corpus.image_root, 64});
  const Batch batch = trainer.next_batch();
  for (auto _ : state) benchmark::DoNotOptimize(trainer.train_step(batch).total);
  std::filesystem::remove_all(dir);
}
BENCHMARK(BM_TrainStep)->Arg(16)->Unit(benchmark::kMillisecond)->Iterations(5);

}  // namespace

BENCHMARK_MAIN();
