#pragma once

// Dense numeric kernels used by the autodiff engine.
//
// Every kernel exists twice: a serial reference in `kernels::serial` and an
// OpenMP version in `kernels::parallel`. The parallel versions only split the
// outer (row/batch) loops, so each output element is accumulated in exactly the
// same order as in the serial reference and results are bit-identical. The
// unqualified entry points in `kernels` dispatch on problem size.

#include <cstddef>
#include <cstdint>
#include <span>

namespace mexa::kernels {

enum class Trans : std::uint8_t { kNo, kYes };

/// Row-major GEMM description: C[m×n] (+)= op(A) · op(B), op(A) is m×k.
struct GemmDims {
  std::size_t m = 0;
  std::size_t k = 0;
  std::size_t n = 0;
  Trans trans_a = Trans::kNo;
  Trans trans_b = Trans::kNo;
  bool accumulate = false;
};

/// What a softmax row does when every entry is masked out.
enum class EmptyRow : std::uint8_t { kError, kZero };

/// Additive penalty applied to masked scores before exponentiation.
inline constexpr double kMaskPenalty = -1e9;

namespace serial {

void gemm(const GemmDims& dims, std::span<const double> a, std::span<const double> b,
          std::span<double> c);

/// `batch` independent GEMMs over contiguous blocks of a, b and c.
void batched_gemm(std::size_t batch, const GemmDims& dims, std::span<const double> a,
                  std::span<const double> b, std::span<double> c);

/// Row-wise softmax over `cols` columns. `mask` is empty or one byte per entry
/// (nonzero = valid). Returns the index of the first fully-masked row when
/// `policy == kError`, or `rows` when every row had a valid entry.
std::size_t softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> x,
                         std::span<const std::uint8_t> mask, EmptyRow policy, std::span<double> y);

/// Layer normalization over the last axis. Writes normalized-and-scaled output
/// to y and the per-row mean and reciprocal standard deviation for backward.
void layer_norm_rows(std::size_t rows, std::size_t cols, std::span<const double> x,
                     std::span<const double> gain, std::span<const double> bias, double eps,
                     std::span<double> y, std::span<double> mean, std::span<double> rstd);

}  // namespace serial

namespace parallel {

void gemm(const GemmDims& dims, std::span<const double> a, std::span<const double> b,
          std::span<double> c);
void batched_gemm(std::size_t batch, const GemmDims& dims, std::span<const double> a,
                  std::span<const double> b, std::span<double> c);
std::size_t softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> x,
                         std::span<const std::uint8_t> mask, EmptyRow policy, std::span<double> y);
void layer_norm_rows(std::size_t rows, std::size_t cols, std::span<const double> x,
                     std::span<const double> gain, std::span<const double> bias, double eps,
                     std::span<double> y, std::span<double> mean, std::span<double> rstd);

/// True when the library was compiled with OpenMP support.
bool available();
int max_threads();

}  // namespace parallel

/// Work (multiply-adds) above which the dispatchers use the parallel kernels.
inline constexpr std::size_t kParallelWorkThreshold = std::size_t{1} << 16;

void gemm(const GemmDims& dims, std::span<const double> a, std::span<const double> b,
          std::span<double> c);
void batched_gemm(std::size_t batch, const GemmDims& dims, std::span<const double> a,
                  std::span<const double> b, std::span<double> c);
std::size_t softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> x,
                         std::span<const std::uint8_t> mask, EmptyRow policy, std::span<double> y);
void layer_norm_rows(std::size_t rows, std::size_t cols, std::span<const double> x,
                     std::span<const double> gain, std::span<const double> bias, double eps,
                     std::span<double> y, std::span<double> mean, std::span<double> rstd);

}  // namespace mexa::kernels
