#include <cmath>

#include "mexa/errors.hpp"
#include "mexa/trainer.hpp"

namespace mexa::train {

OptimizerState OptimizerState::for_params(const ParamList& params) {
  OptimizerState s;
  for (const auto& p : params) {
    s.first_moment.emplace_back(p.shape());
    s.second_moment.emplace_back(p.shape());
  }
  return s;
}

void adam_step(ParamList& params, OptimizerState& state, const AdamOptions& o) {
  if (state.first_moment.size() != params.size()) throw DimensionError("adam_step: state does not match parameters");
  std::vector<Array> grads;
  grads.reserve(params.size());
  for (const auto& p : params) {
    grads.push_back(p.grad());
    for (double g : grads.back().data()) {
      if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient in " + p.name());
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Array& w = params[i].mutable_value();
    Array& m = state.first_moment[i];
    Array& v = state.second_moment[i];
    const Array& g = grads[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = o.beta1 * m[k] + (1.0 - o.beta1) * g[k];
      v[k] = o.beta2 * v[k] + (1.0 - o.beta2) * g[k] * g[k];
      w[k] -= o.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + o.eps);
    }
  }
}

double clip_grad_norm(ParamList& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    for (double g : p.node()->grad.data()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& p : params) {
      for (double& g : p.node()->grad.data()) g *= s;
    }
  }
  return norm;
}

}  // namespace mexa::train
