#include <benchmark/benchmark.h>

#include <numeric>

#include "nnmd/schemes.hpp"
#include "nnmd/structure.hpp"

namespace {

struct Setup {
  nnmd::RankTopology topo{{4, 4, 4}};
  nnmd::SimBox box{{24.0, 24.0, 24.0}};
  std::vector<nnmd::AtomStore> stores;
  nnmd::Cluster cluster{topo, nnmd::CostModel{}};
  nnmd::Exchange exchange;

  explicit Setup(nnmd::Scheme scheme, double side_factor)
      : box({24.0 * side_factor, 24.0 * side_factor, 24.0 * side_factor}),
        exchange(nnmd::plan_exchange(scheme, topo, box, 6.0), topo, box) {
    const int natoms = static_cast<int>(0.085 * box.volume());
    const auto sys = nnmd::random_system(box, natoms, 1, 0.0, 5);
    std::vector<int> gids(sys.size());
    std::iota(gids.begin(), gids.end(), 0);
    stores = nnmd::distribute(topo, box, gids, sys.types, sys.positions, sys.velocities);
    exchange.rebuild(stores, cluster);
  }
};

nnmd::Scheme scheme_arg(const benchmark::State& state) {
  return static_cast<nnmd::Scheme>(state.range(0));
}

double side_arg(const benchmark::State& state) { return state.range(1) / 4.0; }

void BM_Forward(benchmark::State& state) {
  Setup s(scheme_arg(state), side_arg(state));
  for (auto _ : state) benchmark::DoNotOptimize(s.exchange.forward(s.stores, s.cluster));
  state.SetLabel(nnmd::to_string(scheme_arg(state)));
}

void BM_Reverse(benchmark::State& state) {
  Setup s(scheme_arg(state), side_arg(state));
  for (auto _ : state) {
    state.PauseTiming();
    auto ledger = nnmd::make_ledger(s.stores);
    for (const auto& st : s.stores)
      for (int i = st.nlocal; i < st.size_view; ++i)
        ledger[st.rank][i].push_back({st.gid[i], i, {1.0, 0.0, 0.0}});
    state.ResumeTiming();
    benchmark::DoNotOptimize(s.exchange.reverse(s.stores, ledger, s.cluster));
  }
  state.SetLabel(nnmd::to_string(scheme_arg(state)));
}

void BM_Rebuild(benchmark::State& state) {
  Setup s(scheme_arg(state), side_arg(state));
  for (auto _ : state) benchmark::DoNotOptimize(s.exchange.rebuild(s.stores, s.cluster));
  state.SetLabel(nnmd::to_string(scheme_arg(state)));
}

// Second argument is the sub-box side in units of a quarter cutoff.
void scheme_args(benchmark::internal::Benchmark* b) {
  for (auto scheme : {nnmd::Scheme::ThreeStage, nnmd::Scheme::P2P, nnmd::Scheme::NodeBased})
    for (long side : {4, 2}) b->Args({static_cast<long>(scheme), side});
}

}  // namespace

BENCHMARK(BM_Forward)->Apply(scheme_args)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Reverse)->Apply(scheme_args)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Rebuild)->Apply(scheme_args)->Unit(benchmark::kMicrosecond);
