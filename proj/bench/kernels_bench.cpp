// OpenMP kernels against the serial reference. Thread count follows
// OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "mhntf/kernels.hpp"

namespace {

using mhntf::DenseTensor;
using mhntf::Matrix;

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = u(rng);
  return m;
}

DenseTensor random_cube(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(n * n * n);
  for (double& x : v) x = u(rng);
  return DenseTensor({n, n, n}, std::move(v));
}

std::vector<Matrix> cube_factors(std::size_t n, std::size_t r) {
  return {random_matrix(n, r, 1), random_matrix(n, r, 2), random_matrix(n, r, 3)};
}

template <Matrix (*F)(const Matrix&, const Matrix&)>
void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(F(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul<mhntf::kernels::matmul>)->Name("matmul/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_Matmul<mhntf::reference::matmul>)->Name("matmul/serial")->Arg(64)->Arg(256);

template <Matrix (*F)(const DenseTensor&, std::span<const Matrix>, std::size_t)>
void BM_Mttkrp(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const DenseTensor t = random_cube(n, 7);
  const auto f = cube_factors(n, 7);
  const auto mode = static_cast<std::size_t>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(F(t, f, mode));
}
BENCHMARK(BM_Mttkrp<mhntf::kernels::mttkrp>)->Name("mttkrp/parallel")->ArgsProduct({{40, 100}, {0, 2}});
BENCHMARK(BM_Mttkrp<mhntf::reference::mttkrp>)->Name("mttkrp/serial")->ArgsProduct({{40, 100}, {0, 2}});

template <std::vector<double> (*F)(std::span<const Matrix>)>
void BM_CpValues(benchmark::State& state) {
  const auto f = cube_factors(static_cast<std::size_t>(state.range(0)), 7);
  for (auto _ : state) benchmark::DoNotOptimize(F(f));
}
BENCHMARK(BM_CpValues<mhntf::kernels::cp_values>)->Name("cp_values/parallel")->Arg(40)->Arg(100);
BENCHMARK(BM_CpValues<mhntf::reference::cp_values>)->Name("cp_values/serial")->Arg(40)->Arg(100);

template <double (*F)(std::span<const double>, std::span<const double>)>
void BM_SquaredDistance(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, 1000, 1), b = random_matrix(n, 1000, 2);
  for (auto _ : state) benchmark::DoNotOptimize(F(a.values(), b.values()));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * 1000 * sizeof(double)));
}
BENCHMARK(BM_SquaredDistance<mhntf::kernels::squared_distance>)->Name("squared_distance/parallel")->Arg(64)->Arg(1000);
BENCHMARK(BM_SquaredDistance<mhntf::reference::squared_distance>)->Name("squared_distance/serial")->Arg(64)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
