#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "schedsim/index.hpp"
#include "schedsim/oracles.hpp"
#include "schedsim/scheduler.hpp"
#include "schedsim/simulator.hpp"

namespace {

using namespace schedsim;

std::vector<ChannelParams> channels(std::size_t n) {
  std::mt19937_64 engine(17);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<ChannelParams> out;
  for (std::size_t k = 0; k < n; ++k) {
    const double gap = 0.05 + 0.85 * unit(engine);
    const double p01 = 0.01 + (0.98 - gap) * unit(engine);
    out.emplace_back(p01 + gap, p01);
  }
  return out;
}

WeightVector weights(std::size_t n) {
  std::mt19937_64 engine(18);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> w(n);
  for (auto& x : w) {
    x = unit(engine);
  }
  return WeightVector(std::move(w));
}

void BM_IndexTable(benchmark::State& state) {
  const auto c = channels(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    IndexTable table(c, 50);
    benchmark::DoNotOptimize(table.user_values(0).data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_IndexTable)->RangeMultiplier(10)->Range(100, 100'000)->Complexity();

// Ladder sort plus walk, table prebuilt (one QWI frame rebuild).
void BM_Initialize(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const IndexTable table(channels(n), 50);
  const WeightVector w = weights(n);
  for (auto _ : state) {
    ThresholdPolicy policy = initialize(table, w, 0.3 * static_cast<double>(n));
    benchmark::DoNotOptimize(policy.rho);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Initialize)
    ->RangeMultiplier(10)
    ->Range(100, 100'000)
    ->Unit(benchmark::kMillisecond)
    ->Complexity(benchmark::oNLogN);

void BM_ExactStationaryMetrics(benchmark::State& state) {
  const ChannelParams c(0.8, 0.2);
  const int tau = static_cast<int>(state.range(0));
  const auto th = ThresholdSpec::at(BeliefState::observed(0, tau / 2), 0.5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(exact_stationary_metrics(c, tau, th).activation);
  }
}
BENCHMARK(BM_ExactStationaryMetrics)->Arg(10)->Arg(25)->Arg(50);

void BM_SimulateSlots(benchmark::State& state) {
  SimConfig config;
  config.channels = channels(static_cast<std::size_t>(state.range(0)));
  config.budget = 0.25 * static_cast<double>(config.users());
  config.arrivals.assign(config.users(), {ArrivalSpec::Kind::Bernoulli, 0.1});
  config.horizon = 10'000;
  config.frame_length = 1'000;
  for (auto _ : state) {
    const Metrics m = run(config);
    benchmark::DoNotOptimize(m.transmissions_per_slot);
  }
  state.SetItemsProcessed(state.iterations() * config.horizon);
}
BENCHMARK(BM_SimulateSlots)->Arg(4)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
