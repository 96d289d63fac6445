#include "row_kernels.hpp"

namespace mexa::kernels::serial {

void gemm(const GemmDims& dims, std::span<const double> a, std::span<const double> b,
          std::span<double> c) {
  detail::gemm_rows(dims, a.data(), b.data(), c.data(), 0, dims.m);
}

void batched_gemm(std::size_t batch, const GemmDims& dims, std::span<const double> a,
                  std::span<const double> b, std::span<double> c) {
  const std::size_t sa = detail::a_block(dims);
  const std::size_t sb = detail::b_block(dims);
  const std::size_t sc = detail::c_block(dims);
  for (std::size_t bi = 0; bi < batch; ++bi) {
    detail::gemm_rows(dims, a.data() + bi * sa, b.data() + bi * sb, c.data() + bi * sc, 0, dims.m);
  }
}

std::size_t softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> x,
                         std::span<const std::uint8_t> mask, EmptyRow policy, std::span<double> y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const std::uint8_t* m = mask.empty() ? nullptr : mask.data() + r * cols;
    if (!detail::softmax_row(cols, x.data() + r * cols, m, policy, y.data() + r * cols)) {
      return r;
    }
  }
  return rows;
}

void layer_norm_rows(std::size_t rows, std::size_t cols, std::span<const double> x,
                     std::span<const double> gain, std::span<const double> bias, double eps,
                     std::span<double> y, std::span<double> mean, std::span<double> rstd) {
  for (std::size_t r = 0; r < rows; ++r) {
    detail::layer_norm_row(cols, x.data() + r * cols, gain.data(), bias.data(), eps,
                           y.data() + r * cols, mean[r], rstd[r]);
  }
}

}  // namespace mexa::kernels::serial
