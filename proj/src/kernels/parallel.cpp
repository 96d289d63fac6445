#include <algorithm>
#include <atomic>
#include <cstdint>

#include "row_kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mexa::kernels::parallel {

bool available() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void gemm(const GemmDims& dims, std::span<const double> a, std::span<const double> b,
          std::span<double> c) {
  const auto blocks = static_cast<std::int64_t>((dims.m + detail::kRowBlock - 1) / detail::kRowBlock);
#pragma omp parallel for schedule(static)
  for (std::int64_t blk = 0; blk < blocks; ++blk) {
    const std::size_t i0 = static_cast<std::size_t>(blk) * detail::kRowBlock;
    detail::gemm_rows(dims, a.data(), b.data(), c.data(), i0, std::min(dims.m, i0 + detail::kRowBlock));
  }
}

void batched_gemm(std::size_t batch, const GemmDims& dims, std::span<const double> a,
                  std::span<const double> b, std::span<double> c) {
  const std::size_t sa = detail::a_block(dims);
  const std::size_t sb = detail::b_block(dims);
  const std::size_t sc = detail::c_block(dims);
  const auto total = static_cast<std::int64_t>(batch);
#pragma omp parallel for schedule(static)
  for (std::int64_t t = 0; t < total; ++t) {
    const auto bi = static_cast<std::size_t>(t);
    detail::gemm_rows(dims, a.data() + bi * sa, b.data() + bi * sb, c.data() + bi * sc, 0, dims.m);
  }
}

std::size_t softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> x,
                         std::span<const std::uint8_t> mask, EmptyRow policy, std::span<double> y) {
  std::atomic<std::size_t> first_bad{rows};
  const auto n = static_cast<std::int64_t>(rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < n; ++r) {
    const auto row = static_cast<std::size_t>(r);
    const std::uint8_t* m = mask.empty() ? nullptr : mask.data() + row * cols;
    if (!detail::softmax_row(cols, x.data() + row * cols, m, policy, y.data() + row * cols)) {
      std::size_t cur = first_bad.load();
      while (row < cur && !first_bad.compare_exchange_weak(cur, row)) {
      }
    }
  }
  return first_bad.load();
}

void layer_norm_rows(std::size_t rows, std::size_t cols, std::span<const double> x,
                     std::span<const double> gain, std::span<const double> bias, double eps,
                     std::span<double> y, std::span<double> mean, std::span<double> rstd) {
  const auto n = static_cast<std::int64_t>(rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < n; ++r) {
    const auto row = static_cast<std::size_t>(r);
    detail::layer_norm_row(cols, x.data() + row * cols, gain.data(), bias.data(), eps,
                           y.data() + row * cols, mean[row], rstd[row]);
  }
}

}  // namespace mexa::kernels::parallel
