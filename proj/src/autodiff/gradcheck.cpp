#include "mexa/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mexa/errors.hpp"

namespace mexa::ad {
namespace {

double finite_loss(const std::function<Tensor()>& loss_fn) {
  const double v = loss_fn().item();
  if (!std::isfinite(v)) throw NumericError("gradient check: loss is not finite");
  return v;
}

std::vector<std::size_t> coordinates(std::size_t size, std::size_t limit) {
  std::vector<std::size_t> idx;
  if (limit == 0 || size <= limit) {
    idx.resize(size);
    for (std::size_t i = 0; i < size; ++i) idx[i] = i;
    return idx;
  }
  for (std::size_t i = 0; i < limit; ++i) idx.push_back(i * (size - 1) / (limit - 1));
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  return idx;
}

}  // namespace

GradCheckReport check_gradients(const std::function<Tensor()>& loss_fn, std::vector<Tensor> params,
                                double h, std::size_t max_coords_per_tensor) {
  if (!(h > 0)) throw ConfigError("gradient check: step must be positive");
  for (auto& p : params) p.zero_grad();
  const Tensor loss = loss_fn();
  if (!std::isfinite(loss.item())) throw NumericError("gradient check: loss is not finite");
  loss.backward();

  GradCheckReport report;
  for (auto& p : params) {
    const Array analytic = p.grad();
    TensorGradError te{p.name(), 0.0, 0};
    for (std::size_t i : coordinates(p.size(), max_coords_per_tensor)) {
      double& x = p.mutable_value()[i];
      const double saved = x;
      x = saved + h;
      const double up = finite_loss(loss_fn);
      x = saved - h;
      const double down = finite_loss(loss_fn);
      x = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
      te.max_rel_error = std::max(te.max_rel_error, err);
      ++te.coords_checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, te.max_rel_error);
    report.coords_checked += te.coords_checked;
    report.per_tensor.push_back(std::move(te));
  }
  return report;
}

}  // namespace mexa::ad
