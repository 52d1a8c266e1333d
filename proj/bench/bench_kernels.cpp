// Serial vs OpenMP kernels on model-sized inputs.
#include <benchmark/benchmark.h>

#include <random>

#include "polymp/kernels.hpp"

using namespace polymp::kernels;

namespace {

std::vector<double> randn(std::size_t n) {
  std::mt19937_64 rng(n);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

template <bool Parallel>
void BM_Matmul(benchmark::State& state) {
  const std::size_t m = static_cast<std::size_t>(state.range(0)), k = 64, n = 64;
  const auto a = randn(m * k), b = randn(k * n);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    std::fill(c.begin(), c.end(), 0.0);
    if constexpr (Parallel) parallel::matmul_acc(a, b, c, m, k, n);
    else serial::matmul_acc(a, b, c, m, k, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m));
}

template <bool Parallel>
void BM_SegmentMax(benchmark::State& state) {
  const std::size_t rows = static_cast<std::size_t>(state.range(0)), d = 64, n_seg = rows / 2;
  const auto x = randn(rows * d);
  std::vector<std::uint32_t> seg(rows);
  for (std::size_t i = 0; i < rows; ++i) seg[i] = static_cast<std::uint32_t>((i * 7919) % n_seg);
  const SegmentIndex idx = build_segment_index(seg, n_seg);
  std::vector<double> out(n_seg * d);
  std::vector<std::int64_t> arg(n_seg * d);
  for (auto _ : state) {
    if constexpr (Parallel) parallel::segment_max(x, idx, d, out, arg);
    else serial::segment_max(x, idx, d, out, arg);
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_Conv1d(benchmark::State& state) {
  const std::size_t b = static_cast<std::size_t>(state.range(0)), len = 64, din = 32, dout = 64, k = 3;
  const auto x = randn(b * len * din), w = randn(k * din * dout);
  std::vector<double> y(b * len * dout);
  for (auto _ : state) {
    std::fill(y.begin(), y.end(), 0.0);
    if constexpr (Parallel) parallel::conv1d_forward(x, w, y, b, len, din, dout, k);
    else serial::conv1d_forward(x, w, y, b, len, din, dout, k);
    benchmark::DoNotOptimize(y.data());
  }
}

}  // namespace

BENCHMARK(BM_Matmul<false>)->Arg(1024)->Arg(8192);
BENCHMARK(BM_Matmul<true>)->Arg(1024)->Arg(8192);
BENCHMARK(BM_SegmentMax<false>)->Arg(4096)->Arg(32768);
BENCHMARK(BM_SegmentMax<true>)->Arg(4096)->Arg(32768);
BENCHMARK(BM_Conv1d<false>)->Arg(16)->Arg(64);
BENCHMARK(BM_Conv1d<true>)->Arg(16)->Arg(64);

BENCHMARK_MAIN();
