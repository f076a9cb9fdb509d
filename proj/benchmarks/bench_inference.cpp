// Decision-round latency versus device count, and one plant step.

#include <benchmark/benchmark.h>

#include "mecsim/agents/cmaddpg.hpp"
#include "mecsim/baselines/saddpg.hpp"
#include "mecsim/env/env.hpp"

using namespace mecsim;

namespace {

env::SimConfig sim_for(int n) {
  env::SimConfig sim;
  sim.n_min = sim.n_max = n;
  sim.task_min = 1e6;
  sim.task_max = 1e7;
  return sim;
}

void CooperativeInference(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto sim = sim_for(n);
  agents::ActorArch arch;  // full-scale stacks
  numkit::Rng rng(1);
  agents::CmaddpgActors actors(sim, arch, agents::Aggregator::gat, rng);
  env::Env e(sim);
  numkit::Rng er(2);
  e.reset(er, std::vector<std::uint8_t>(n, 1));
  for (auto _ : state) {
    auto a = actors.act(e);
    benchmark::DoNotOptimize(a.lambda.data());
  }
  state.counters["agents"] = n + 1;
}

void SaddpgInference(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto sim = sim_for(n);
  agents::ActorArch arch;
  numkit::Rng rng(1);
  baselines::SaddpgActor actor(sim, arch, rng);
  env::Env e(sim);
  numkit::Rng er(2);
  e.reset(er, std::vector<std::uint8_t>(n, 1));
  for (auto _ : state) {
    auto a = actor.act(e);
    benchmark::DoNotOptimize(a.lambda.data());
  }
  state.counters["input_width"] = actor.input_width();
}

void EnvStep(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto sim = sim_for(n);
  agents::ActorArch arch;
  arch.mu_id_hidden = {32};
  arch.eps_uav_hidden = {32};
  arch.eps_id_hidden = {32};
  arch.gamma_v_hidden = {32};
  arch.gamma_f_hidden = {32};
  arch.pi_id_hidden = {32};
  numkit::Rng rng(1);
  agents::CmaddpgActors actors(sim, arch, agents::Aggregator::gat, rng);
  env::Env e(sim);
  numkit::Rng er(2);
  e.reset(er, std::vector<std::uint8_t>(n, 1));
  auto a = actors.act(e);
  for (auto _ : state) {
    state.PauseTiming();
    env::Env copy = e;
    state.ResumeTiming();
    auto out = copy.step(a, er);
    benchmark::DoNotOptimize(out.reward);
  }
}

}  // namespace

BENCHMARK(CooperativeInference)->Arg(5)->Arg(10)->Arg(20)->Arg(30)->Unit(benchmark::kMillisecond);
BENCHMARK(SaddpgInference)->Arg(5)->Arg(10)->Arg(20)->Arg(30)->Unit(benchmark::kMillisecond);
BENCHMARK(EnvStep)->Arg(5)->Arg(10)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
