#include "mexa/kernels.hpp"

namespace mexa::kernels {
namespace {

bool use_parallel(std::size_t work) {
  return parallel::available() && parallel::max_threads() > 1 && work >= kParallelWorkThreshold;
}

}  // namespace

void gemm(const GemmDims& dims, std::span<const double> a, std::span<const double> b,
          std::span<double> c) {
  if (use_parallel(dims.m * dims.k * dims.n)) {
    parallel::gemm(dims, a, b, c);
  } else {
    serial::gemm(dims, a, b, c);
  }
}

void batched_gemm(std::size_t batch, const GemmDims& dims, std::span<const double> a,
                  std::span<const double> b, std::span<double> c) {
  if (use_parallel(batch * dims.m * dims.k * dims.n)) {
    parallel::batched_gemm(batch, dims, a, b, c);
  } else {
    serial::batched_gemm(batch, dims, a, b, c);
  }
}

std::size_t softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> x,
                         std::span<const std::uint8_t> mask, EmptyRow policy, std::span<double> y) {
  if (use_parallel(rows * cols * 8)) return parallel::softmax_rows(rows, cols, x, mask, policy, y);
  return serial::softmax_rows(rows, cols, x, mask, policy, y);
}

void layer_norm_rows(std::size_t rows, std::size_t cols, std::span<const double> x,
                     std::span<const double> gain, std::span<const double> bias, double eps,
                     std::span<double> y, std::span<double> mean, std::span<double> rstd) {
  if (use_parallel(rows * cols * 8)) {
    parallel::layer_norm_rows(rows, cols, x, gain, bias, eps, y, mean, rstd);
  } else {
    serial::layer_norm_rows(rows, cols, x, gain, bias, eps, y, mean, rstd);
  }
}

}  // namespace mexa::kernels
