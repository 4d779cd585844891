#include <benchmark/benchmark.h>

#include <numeric>

#include "nnmd/neighbor.hpp"
#include "nnmd/potential.hpp"
#include "nnmd/structure.hpp"

namespace {

// Open cluster of copper-like density; forces for every atom.
void BM_EnergyForces(benchmark::State& state) {
  const auto mode = static_cast<nnmd::PrecisionMode>(state.range(0));
  const int width = static_cast<int>(state.range(1));
  const nnmd::SimBox box({16.0, 16.0, 16.0});
  const auto sys = nnmd::random_system(box, 300, 1, 1.8, 7);
  nnmd::CutoffSpec cut;
  cut.rc = 6.0;
  cut.rcs = 0.5;
  cut.skin = 0.0;
  const std::vector<int> sel{160};
  nnmd::ModelDims dims;
  dims.fit = {width, width, width};
  auto params = nnmd::init_params(3, dims, 160.0 * 160.0 / 4.0);
  params.precision = mode;
  nnmd::DeepPotential pot(params, cut);
  std::vector<int> centers(sys.size());
  std::iota(centers.begin(), centers.end(), 0);
  const auto list = nnmd::build_neighbor_list(sys.positions, sys.types, {}, centers, cut, sel);
  for (auto _ : state) {
    auto r = nnmd::compute_energy_forces(pot, sys.positions, sys.types, list);
    benchmark::DoNotOptimize(r.energy);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(centers.size()));
  state.SetLabel(nnmd::to_string(mode));
}

}  // namespace

BENCHMARK(BM_EnergyForces)
    ->ArgsProduct({{static_cast<long>(nnmd::PrecisionMode::Double),
                    static_cast<long>(nnmd::PrecisionMode::MixFp32),
                    static_cast<long>(nnmd::PrecisionMode::MixFp16)},
                   {64, 240}})
    ->Unit(benchmark::kMillisecond);
