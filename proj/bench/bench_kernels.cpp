// OpenMP kernels against their serial references.
//   ./bench_kernels --benchmark_filter=matmul

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "eeikd/kernels.hpp"
#include "eeikd/nets.hpp"
#include "eeikd/selection.hpp"

using namespace eeikd;

namespace {

std::vector<double> random_values(std::size_t n) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  std::vector<double> v(n);
  for (double& x : v) x = normal(rng);
  return v;
}

template <auto Kernel>
void bm_matmul(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0)), k = std::size_t{64}, p = std::size_t{64};
  const auto a = random_values(m * k), b = random_values(k * p);
  std::vector<double> out(m * p);
  for (auto _ : state) {
    Kernel(a, b, out, m, k, p);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m * k * p));
}

template <auto Kernel>
void bm_pairwise(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0)), d = std::size_t{16};
  const auto x = random_values(n * d);
  std::vector<double> out(n * n);
  for (auto _ : state) {
    Kernel(x, out, n, d);
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void bm_score_pool(benchmark::State& state) {
  auto teacher = nets::Network::initialize(nets::NetworkSpec::mlp(16, {64, 64, 64, 64}, 6), 1);
  teacher.set_mode(nets::Mode::eval);
  const auto rows = static_cast<std::size_t>(state.range(0));
  const Tensor pool = Tensor::matrix(rows, 16, random_values(rows * 16));
  for (auto _ : state) {
    auto probs = Parallel ? selection::score_pool(teacher, pool) : selection::reference::score_pool(teacher, pool);
    benchmark::DoNotOptimize(probs.data());
  }
}

}  // namespace

BENCHMARK(bm_matmul<kernels::reference::matmul>)->Name("matmul/serial")->Arg(64)->Arg(512)->Arg(4096);
BENCHMARK(bm_matmul<kernels::matmul>)->Name("matmul/openmp")->Arg(64)->Arg(512)->Arg(4096);
BENCHMARK(bm_matmul<kernels::reference::matmul_add_at>)->Name("matmul_add_at/serial")->Arg(512)->Arg(4096);
BENCHMARK(bm_matmul<kernels::matmul_add_at>)->Name("matmul_add_at/openmp")->Arg(512)->Arg(4096);
BENCHMARK(bm_pairwise<kernels::reference::pairwise_l2>)->Name("pairwise_l2/serial")->Arg(64)->Arg(1024);
BENCHMARK(bm_pairwise<kernels::pairwise_l2>)->Name("pairwise_l2/openmp")->Arg(64)->Arg(1024);
BENCHMARK(bm_score_pool<false>)->Name("score_pool/serial")->Arg(20000);
BENCHMARK(bm_score_pool<true>)->Name("score_pool/openmp")->Arg(20000);

BENCHMARK_MAIN();
