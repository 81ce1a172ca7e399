#include <benchmark/benchmark.h>

#include <random>

#include "oncf/evaluation.hpp"
#include "oncf/synthetic.hpp"
#include "oncf/tensor.hpp"
#include "oncf/training.hpp"

namespace {

using namespace oncf;

Mat random_map(std::size_t K, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Mat E(K, K);
  for (auto& x : E.values()) x = n(rng);
  return E;
}

void BM_Outer(benchmark::State& state) {
  const auto K = static_cast<std::size_t>(state.range(0));
  const Vec a(K, 0.5), b(K, -0.25);
  for (auto _ : state) benchmark::DoNotOptimize(outer(a, b));
}
BENCHMARK(BM_Outer)->Arg(16)->Arg(64);

void BM_Conv2x2Forward(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto C = static_cast<std::size_t>(state.range(1));
  Tensor3 in(side, side, C, 0.1);
  Tensor4 k(2, 2, C, C, 0.05);
  for (auto _ : state) benchmark::DoNotOptimize(conv2x2s2_forward(in, k, 0.1));
}
BENCHMARK(BM_Conv2x2Forward)->Args({32, 32})->Args({16, 32})->Args({8, 8});

void BM_Conv2x2Backward(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto C = static_cast<std::size_t>(state.range(1));
  Tensor3 in(side, side, C, 0.1);
  Tensor4 k(2, 2, C, C, 0.05);
  const ConvOutput out = conv2x2s2_forward(in, k, 0.1);
  const Tensor3 d(side / 2, side / 2, C, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(conv2x2s2_backward(in, k, out.pre, d));
}
BENCHMARK(BM_Conv2x2Backward)->Args({32, 32})->Args({16, 32})->Args({8, 8});

void BM_ConvncfForward(benchmark::State& state) {
  const auto K = static_cast<std::size_t>(state.range(0));
  const Head h = init_head(ModelSpec::convncf(Variant::MF, K, 32), 1);
  const Mat E = random_map(K, 2);
  for (auto _ : state) benchmark::DoNotOptimize(convncf_forward(std::get<ConvStack>(h), E).score);
}
BENCHMARK(BM_ConvncfForward)->Arg(16)->Arg(32)->Arg(64);

void BM_ConvncfBackward(benchmark::State& state) {
  const auto K = static_cast<std::size_t>(state.range(0));
  const Head h = init_head(ModelSpec::convncf(Variant::MF, K, 32), 1);
  const ConvStack& s = std::get<ConvStack>(h);
  const ConvForward f = convncf_forward(s, random_map(K, 2));
  for (auto _ : state) benchmark::DoNotOptimize(convncf_backward(s, f, 1.0));
}
BENCHMARK(BM_ConvncfBackward)->Arg(16)->Arg(32)->Arg(64);

const SplitSet& bench_split() {
  static const SplitSet split = [] {
    SyntheticSpec s;
    return split_leave_latest_out(make_synthetic(s), 1);
  }();
  return split;
}

void BM_TrainEpoch(benchmark::State& state) {
  const SplitSet& split = bench_split();
  TrainConfig c;
  c.epochs = 1;
  c.eval_validation = c.eval_test = false;
  const auto K = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    Model m = make_model(ModelSpec::convncf(Variant::MF, K, 32), split.train.num_users(), split.train.num_items(), 1);
    benchmark::DoNotOptimize(train(m, split, c));
  }
}
BENCHMARK(BM_TrainEpoch)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_EvaluateTest(benchmark::State& state) {
  const SplitSet& split = bench_split();
  const auto K = static_cast<std::size_t>(state.range(0));
  const Model m = make_model(ModelSpec::convncf(Variant::MF, K, 32), split.train.num_users(),
                             split.train.num_items(), 1);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(m, split, EvalSplit::Test));
}
BENCHMARK(BM_EvaluateTest)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
