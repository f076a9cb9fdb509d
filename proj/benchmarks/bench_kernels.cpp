// Dense kernel throughput at training-relevant shapes.

#include <benchmark/benchmark.h>

#include "mecsim/numkit/net.hpp"
#include "mecsim/numkit/tensor.hpp"

using namespace mecsim::numkit;

namespace {

void GemmNN(benchmark::State& state) {
  const int b = static_cast<int>(state.range(0));
  Rng rng(1);
  Tensor2 a(b, 171), w(171, 128), c(b, 128);
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) a(i, j) = rng.uniform(-1, 1);
  for (int i = 0; i < w.rows(); ++i)
    for (int j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-1, 1);
  for (auto _ : state) {
    gemm_nn(a, w, c);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(b) * 171 * 128);
}

void ForwardBackward(benchmark::State& state) {
  const int b = static_cast<int>(state.range(0));
  Rng rng(1);
  DenseNet net("bench", 171, {128, 64}, 1, Act::relu, Act::identity, rng);
  Tensor2 x(b, 171);
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < x.cols(); ++j) x(i, j) = rng.uniform(-1, 1);
  Tensor2 up(b, 1);
  up.fill(1.0 / b);
  ParamSet grads = zeros_like(net.param_set());
  for (auto _ : state) {
    DenseNet::Cache cache;
    net.forward(x, &cache);
    grads.fill(0.0);
    auto dx = net.backward(cache, up, grads, 0);
    benchmark::DoNotOptimize(dx.data());
  }
}

}  // namespace

BENCHMARK(GemmNN)->Arg(32)->Arg(64)->Arg(256);
BENCHMARK(ForwardBackward)->Arg(32)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
