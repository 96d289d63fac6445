// Serial reference vs OpenMP kernels on shapes seen during training
// (batch 64, up to 46 tokens, width 32) and a larger square GEMM.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "mexa/kernels.hpp"

namespace k = mexa::kernels;

namespace {

std::vector<double> filled(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

template <bool Parallel>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const k::GemmDims dims{n, n, n};
  const auto a = filled(n * n, 1), b = filled(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::gemm(dims, a, b, c);
    } else {
      k::serial::gemm(dims, a, b, c);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}

// Attention scores: 64 trials × 46 queries × 46 keys, width 32.
template <bool Parallel>
void BM_BatchedGemmAttention(benchmark::State& state) {
  constexpr std::size_t batch = 64, l = 46, d = 32;
  const k::GemmDims dims{l, d, l, k::Trans::kNo, k::Trans::kYes};
  const auto q = filled(batch * l * d, 3), kk = filled(batch * l * d, 4);
  std::vector<double> s(batch * l * l);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::batched_gemm(batch, dims, q, kk, s);
    } else {
      k::serial::batched_gemm(batch, dims, q, kk, s);
    }
    benchmark::DoNotOptimize(s.data());
  }
}

template <bool Parallel>
void BM_Softmax(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  constexpr std::size_t cols = 46;
  const auto x = filled(rows * cols, 5);
  std::vector<std::uint8_t> mask(rows * cols, 1);
  for (std::size_t i = 0; i < mask.size(); i += 7) mask[i] = 0;
  std::vector<double> y(rows * cols);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::softmax_rows(rows, cols, x, mask, k::EmptyRow::kZero, y);
    } else {
      k::serial::softmax_rows(rows, cols, x, mask, k::EmptyRow::kZero, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_LayerNorm(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  constexpr std::size_t cols = 32;
  const auto x = filled(rows * cols, 6);
  const std::vector<double> gain(cols, 1.0), bias(cols, 0.0);
  std::vector<double> y(rows * cols), mean(rows), rstd(rows);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::layer_norm_rows(rows, cols, x, gain, bias, 1e-5, y, mean, rstd);
    } else {
      k::serial::layer_norm_rows(rows, cols, x, gain, bias, 1e-5, y, mean, rstd);
    }
    benchmark::DoNotOptimize(y.data());
  }
}

}  // namespace

BENCHMARK(BM_Gemm<false>)->Name("gemm/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_Gemm<true>)->Name("gemm/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_BatchedGemmAttention<false>)->Name("attention_scores/serial");
BENCHMARK(BM_BatchedGemmAttention<true>)->Name("attention_scores/parallel");
BENCHMARK(BM_Softmax<false>)->Name("softmax/serial")->Arg(64 * 46)->Arg(64 * 46 * 8);
BENCHMARK(BM_Softmax<true>)->Name("softmax/parallel")->Arg(64 * 46)->Arg(64 * 46 * 8);
BENCHMARK(BM_LayerNorm<false>)->Name("layer_norm/serial")->Arg(64 * 46)->Arg(64 * 46 * 8);
BENCHMARK(BM_LayerNorm<true>)->Name("layer_norm/parallel")->Arg(64 * 46)->Arg(64 * 46 * 8);

BENCHMARK_MAIN();
