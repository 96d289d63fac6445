#include "mexa/array.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "mexa/errors.hpp"

namespace mexa {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

Array::Array(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Array::Array(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_)) {
    throw DimensionError("array data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string(shape_));
  }
}

Array Array::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t m = rows.size();
  const std::size_t n = m == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(m * n);
  for (const auto& r : rows) {
    if (r.size() != n) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Array({m, n}, std::move(data));
}

double Array::item() const {
  if (data_.size() != 1) throw DimensionError("item() on array of shape " + shape_string(shape_));
  return data_[0];
}

Array Array::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Array(std::move(shape), data_);
}

void Array::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Mask::Mask(Shape s, bool fill) : shape(std::move(s)), bits(shape_size(shape), fill ? 1 : 0) {}

Mask::Mask(Shape s, std::vector<std::uint8_t> b) : shape(std::move(s)), bits(std::move(b)) {
  if (bits.size() != shape_size(shape)) {
    throw DimensionError("mask length does not match shape " + shape_string(shape));
  }
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](auto b) { return b != 0; }));
}

Array Mask::as_array() const {
  Array out(shape);
  for (std::size_t i = 0; i < bits.size(); ++i) out[i] = bits[i] ? 1.0 : 0.0;
  return out;
}

}  // namespace mexa
