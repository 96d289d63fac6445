#include "mexa/params.hpp"

#include <cmath>

namespace mexa::model {

Tensor xavier(std::string name, std::size_t rows, std::size_t cols, Rng& rng, bool equalized) {
  double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  if (equalized) limit *= std::sqrt(static_cast<double>(rows));
  std::uniform_real_distribution<double> u(-limit, limit);
  Array a({rows, cols});
  for (auto& x : a.data()) x = u(rng);
  return Tensor::parameter(std::move(a), std::move(name));
}

Tensor effective(const Tensor& w, bool equalized) {
  return equalized ? ad::scale(w, 1.0 / std::sqrt(static_cast<double>(w.dim(0)))) : w;
}

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b, bool equalized) {
  return ad::linear(x, effective(w, equalized), b);
}

Tensor zeros(std::string name, Shape shape) {
  return Tensor::parameter(Array(std::move(shape), 0.0), std::move(name));
}

Tensor ones(std::string name, Shape shape) {
  return Tensor::parameter(Array(std::move(shape), 1.0), std::move(name));
}

}  // namespace mexa::model
