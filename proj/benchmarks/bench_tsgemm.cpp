#include <benchmark/benchmark.h>

#include <random>

#include "nnmd/tsgemm.hpp"

namespace {

nnmd::Matrix<double> random_matrix(std::size_t rows, std::size_t cols, unsigned seed) {
  nnmd::Matrix<double> m(rows, cols);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

// Row vector times a square layer, the fitting-net shape.
void BM_GemmFast(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(1, n, 1), b = random_matrix(n, n, 2);
  nnmd::Matrix<double> c(1, n);
  for (auto _ : state) {
    nnmd::gemm_nn(a, b, c);
    benchmark::DoNotOptimize(c(0, 0));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n * n));
}

void BM_GemmGeneral(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(1, n, 1), b = random_matrix(n, n, 2);
  nnmd::Matrix<double> c(1, n);
  for (auto _ : state) {
    nnmd::gemm_nn_general(a, b, c);
    benchmark::DoNotOptimize(c(0, 0));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n * n));
}

void BM_GemmFp16(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(1, n, 1), b = random_matrix(n, n, 2);
  const auto b_half = nnmd::quantize_fp16_copy(b);
  nnmd::Matrix<double> c(1, n);
  for (auto _ : state) {
    nnmd::gemm_fp16(a, b_half, c);
    benchmark::DoNotOptimize(c(0, 0));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n * n));
}

// Embedding-net shape: many rows, narrow layers.
void BM_GemmTall(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(rows, 16, 3), b = random_matrix(16, 16, 4);
  nnmd::Matrix<double> c(rows, 16);
  for (auto _ : state) {
    nnmd::gemm_nn(a, b, c);
    benchmark::DoNotOptimize(c(0, 0));
  }
}

}  // namespace

BENCHMARK(BM_GemmFast)->Arg(64)->Arg(240);
BENCHMARK(BM_GemmGeneral)->Arg(64)->Arg(240);
BENCHMARK(BM_GemmFp16)->Arg(64)->Arg(240);
BENCHMARK(BM_GemmTall)->Arg(138)->Arg(512);
