#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mexa/autodiff.hpp"

namespace mexa::ad {

struct TensorGradError {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::vector<TensorGradError> per_tensor;
};

/// Compares the analytic gradient of the scalar `loss_fn()` with respect to each
/// leaf in `params` against the central difference (f(p+h) - f(p-h)) / 2h.
/// The per-coordinate error is |analytic - numeric| / max(1, |numeric|).
///
/// `max_coords_per_tensor` (0 = all) limits the work on large tensors by
/// checking evenly spaced coordinates, always including the first and last.
/// Throws NumericError when the loss is not finite.
GradCheckReport check_gradients(const std::function<Tensor()>& loss_fn, std::vector<Tensor> params,
                                double h = 1e-5, std::size_t max_coords_per_tensor = 0);

}  // namespace mexa::ad
