#include <benchmark/benchmark.h>

#include "popsynth/nn.h"
#include "popsynth/toycensus.h"
#include "popsynth/validate.h"
#include "popsynth/wgan.h"

namespace popsynth {
namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.normal();
  return m;
}

void BM_DenseForward(benchmark::State& state) {
  Rng rng(1);
  const auto batch = static_cast<Eigen::Index>(state.range(0));
  const nn::DenseLayer layer = nn::DenseLayer::normal_init(294, 100, 0.02, rng);
  const Matrix x = random_matrix(batch, 294, rng);
  for (auto _ : state) benchmark::DoNotOptimize(nn::dense_forward(layer, x));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_DenseForward)->Arg(200)->Arg(300);

void BM_CriticLossWithPenalty(benchmark::State& state) {
  Rng rng(2);
  const auto batch = static_cast<Eigen::Index>(state.range(0));
  const Critic critic(294, rng);
  const Matrix real = random_matrix(batch, 294, rng);
  const Matrix fake = random_matrix(batch, 294, rng);
  for (auto _ : state) {
    ad::Tape tape;
    auto params = critic.bind(tape, true);
    CriticFn fn = [&](const ad::Var& x) { return critic.forward(params, x); };
    const auto loss = critic_loss(tape, fn, real, fake, 10.0, rng);
    benchmark::DoNotOptimize(tape.grad(loss.loss, params));
  }
}
BENCHMARK(BM_CriticLossWithPenalty)->Arg(200)->Arg(300)->Unit(benchmark::kMillisecond);

void BM_TrainIteration(benchmark::State& state) {
  const ToyDataset toy = generate_toy(ToySpec::census(5000, 7));
  TrainConfig config;
  config.learning_rate = 1e-4;
  config.batch_size = 200;
  config.iterations = 1;
  Trainer trainer(encode(toy.data.records, toy.schema), config);
  for (auto _ : state) trainer.step();
}
BENCHMARK(BM_TrainIteration)->Unit(benchmark::kMillisecond);

void BM_Sample(benchmark::State& state) {
  Rng rng(3);
  const ToyDataset toy = generate_toy(ToySpec::census(10, 7));
  const Generator gen(100, static_cast<Eigen::Index>(toy.schema.feature_dim()), rng);
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample(gen, n, toy.schema, {DecodeMode::kSample, 0.5}, 4));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Sample)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_PooledContingency(benchmark::State& state) {
  const ToyDataset toy = generate_toy(ToySpec::census(static_cast<std::size_t>(state.range(0)), 7));
  for (auto _ : state) {
    benchmark::DoNotOptimize(pooled_contingency(toy.data.records, toy.schema, 2));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PooledContingency)->Arg(5000)->Arg(50000)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace popsynth

BENCHMARK_MAIN();
