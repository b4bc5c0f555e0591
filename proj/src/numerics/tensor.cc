// maac/numerics/tensor.cc

#include "maac/numerics/tensor.h"

#include <cmath>
#include <numeric>
#include <sstream>

namespace maac {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill, Precision precision)
    : shape_(std::move(shape)), precision_(precision) {
  for (auto d : shape_) {
    if (d == 0) throw std::invalid_argument("Tensor: zero-sized dimension");
  }
  data_.assign(shape_size(shape_), fill);
  if (precision_ == Precision::kSingle) set_precision(precision_);
}

Tensor::Tensor(Shape shape, std::vector<double> data, Precision precision)
    : shape_(std::move(shape)), data_(std::move(data)), precision_(precision) {
  for (auto d : shape_) {
    if (d == 0) throw std::invalid_argument("Tensor: zero-sized dimension");
  }
  if (shape_size(shape_) != data_.size()) {
    throw std::invalid_argument("Tensor: shape " + shape_string(shape_) +
                                " does not match " +
                                std::to_string(data_.size()) + " values");
  }
  if (precision_ == Precision::kSingle) set_precision(precision_);
}

void Tensor::set_precision(Precision p) {
  precision_ = p;
  if (p == Precision::kSingle) {
    for (auto& v : data_) v = static_cast<double>(static_cast<float>(v));
  }
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw std::invalid_argument("reshape: " + shape_string(shape_) + " -> " +
                                shape_string(shape));
  }
  return Tensor(std::move(shape), data_, precision_);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::finalize(const char* op) {
  if (precision_ == Precision::kSingle) set_precision(precision_);
  if (!all_finite()) {
    throw NonFiniteError(std::string(op) + ": non-finite value produced");
  }
}

}  // namespace maac
