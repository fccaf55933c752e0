#include <benchmark/benchmark.h>

#include <random>

#include "snn/network.hpp"
#include "snn/ops.hpp"
#include "snn/training.hpp"

namespace {

snn::Tensor random_tensor(const snn::Shape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  snn::Tensor t(shape);
  for (double& v : t.data()) v = u(rng);
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const snn::Tensor a = random_tensor({64, n}, 1), b = random_tensor({n, 256}, 2);
  for (auto _ : state) {
    snn::Tape tape;
    benchmark::DoNotOptimize(snn::ops::matmul(tape.constant(a), tape.constant(b)).value().data().data());
  }
}
BENCHMARK(BM_Matmul)->Arg(128)->Arg(784);

void BM_Conv2d(benchmark::State& state) {
  const snn::Tensor x = random_tensor({16, 1, 28, 28}, 1), k = random_tensor({16, 1, 3, 3}, 2);
  for (auto _ : state) {
    snn::Tape tape;
    benchmark::DoNotOptimize(snn::ops::conv2d(tape.constant(x), tape.constant(k), 2, 1).value().data().data());
  }
}
BENCHMARK(BM_Conv2d);

void BM_LifStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const snn::Tensor x = random_tensor({n}, 3);
  snn::LIFParams p;
  for (auto _ : state) {
    snn::Tape tape;
    snn::LIFState s = snn::fresh_state(tape, {n}, p);
    for (int t = 0; t < 10; ++t) s = snn::lif_step(s, tape.constant(x), p).state;
    benchmark::DoNotOptimize(s.v.value().data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n) * 10);
}
BENCHMARK(BM_LifStep)->Arg(256)->Arg(4096);

void BM_TrainBatch(benchmark::State& state) {
  snn::Network net = snn::build_mlpsnn(784, {256, 128}, 10, snn::LIFParams{}, 10, 1);
  const snn::Dataset data = snn::synthetic_rates(10, 7, {1, 28, 28}, 3.0, 1);
  snn::TrainConfig cfg;
  cfg.max_epochs = 1;
  cfg.val_fraction = 0.0;
  cfg.batch_size = 64;
  for (auto _ : state) {
    benchmark::DoNotOptimize(snn::fit(net, data, cfg).network.weights.size());
  }
}
BENCHMARK(BM_TrainBatch)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
