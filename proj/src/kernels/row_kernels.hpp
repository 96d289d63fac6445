#pragma once

// Single-row building blocks shared by the serial and OpenMP kernels. Both
// drivers call these unchanged, which is what makes them bit-identical.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>

#include "mexa/kernels.hpp"

namespace mexa::kernels::detail {

inline void gemm_row(const GemmDims& d, const double* a, const double* b, double* c_row,
                     std::size_t i) {
  const bool ta = d.trans_a == Trans::kYes;
  const bool tb = d.trans_b == Trans::kYes;
  if (!tb) {
    if (!d.accumulate) std::fill(c_row, c_row + d.n, 0.0);
    for (std::size_t k = 0; k < d.k; ++k) {
      const double av = ta ? a[k * d.m + i] : a[i * d.k + k];
      if (av == 0.0) continue;
      const double* b_row = b + k * d.n;
      for (std::size_t j = 0; j < d.n; ++j) c_row[j] += av * b_row[j];
    }
    return;
  }
  for (std::size_t j = 0; j < d.n; ++j) {
    const double* b_row = b + j * d.k;
    double s = 0.0;
    if (ta) {
      for (std::size_t k = 0; k < d.k; ++k) s += a[k * d.m + i] * b_row[k];
    } else {
      const double* a_row = a + i * d.k;
      for (std::size_t k = 0; k < d.k; ++k) s += a_row[k] * b_row[k];
    }
    c_row[j] = d.accumulate ? c_row[j] + s : s;
  }
}

// Rows [i0, i1) of C. With a transposed A and plain B the rows share one pass
// over A and B; every element still accumulates over k in ascending order, so
// the result does not depend on how rows are blocked.
inline void gemm_rows(const GemmDims& d, const double* a, const double* b, double* c,
                      std::size_t i0, std::size_t i1) {
  if (d.trans_a == Trans::kYes && d.trans_b == Trans::kNo) {
    if (!d.accumulate) std::fill(c + i0 * d.n, c + i1 * d.n, 0.0);
    for (std::size_t k = 0; k < d.k; ++k) {
      const double* a_row = a + k * d.m;
      const double* b_row = b + k * d.n;
      for (std::size_t i = i0; i < i1; ++i) {
        const double av = a_row[i];
        if (av == 0.0) continue;
        double* c_row = c + i * d.n;
        for (std::size_t j = 0; j < d.n; ++j) c_row[j] += av * b_row[j];
      }
    }
    return;
  }
  for (std::size_t i = i0; i < i1; ++i) gemm_row(d, a, b, c + i * d.n, i);
}

inline constexpr std::size_t kRowBlock = 16;

// Returns false when the row is fully masked.
inline bool softmax_row(std::size_t cols, const double* x, const std::uint8_t* mask,
                        EmptyRow policy, double* y) {
  bool any_valid = mask == nullptr;
  if (mask != nullptr) {
    for (std::size_t j = 0; j < cols; ++j) any_valid = any_valid || mask[j] != 0;
  }
  if (!any_valid) {
    std::fill(y, y + cols, 0.0);
    return policy == EmptyRow::kZero;
  }
  double mx = -INFINITY;
  for (std::size_t j = 0; j < cols; ++j) {
    const double v = (mask != nullptr && mask[j] == 0) ? x[j] + kMaskPenalty : x[j];
    y[j] = v;
    mx = std::max(mx, v);
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    y[j] = std::exp(y[j] - mx);
    sum += y[j];
  }
  const double inv = 1.0 / sum;
  for (std::size_t j = 0; j < cols; ++j) {
    y[j] = (mask != nullptr && mask[j] == 0) ? 0.0 : y[j] * inv;
  }
  return true;
}

inline void layer_norm_row(std::size_t cols, const double* x, const double* gain,
                           const double* bias, double eps, double* y, double& mean, double& rstd) {
  double mu = 0.0;
  for (std::size_t j = 0; j < cols; ++j) mu += x[j];
  mu /= static_cast<double>(cols);
  double var = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    const double c = x[j] - mu;
    var += c * c;
  }
  var /= static_cast<double>(cols);
  const double r = 1.0 / std::sqrt(var + eps);
  for (std::size_t j = 0; j < cols; ++j) y[j] = (x[j] - mu) * r * gain[j] + bias[j];
  mean = mu;
  rstd = r;
}

inline std::size_t a_block(const GemmDims& d) { return d.m * d.k; }
inline std::size_t b_block(const GemmDims& d) { return d.k * d.n; }
inline std::size_t c_block(const GemmDims& d) { return d.m * d.n; }

}  // namespace mexa::kernels::detail
