#pragma once

#include <string>
#include <vector>

#include "mexa/autodiff.hpp"
#include "mexa/rng.hpp"

namespace mexa::model {

using ad::Tensor;
using ParamList = std::vector<Tensor>;

/// Glorot-uniform [rows×cols] parameter. With `equalized` the stored values
/// are scaled by √rows so that dense(..., true) starts from the same function.
Tensor xavier(std::string name, std::size_t rows, std::size_t cols, Rng& rng, bool equalized = false);

/// W, or W/√rows under the equalized parametrization.
Tensor effective(const Tensor& w, bool equalized);
/// x·W + b, or x·(W/√fan_in) + b under the equalized-learning-rate
/// parametrization (fan_in = rows of W). `b` may be undefined.
Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b, bool equalized);
Tensor zeros(std::string name, Shape shape);
Tensor ones(std::string name, Shape shape);

}  // namespace mexa::model
