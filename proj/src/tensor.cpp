#include "nogap/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>
#include <sstream>

#include "nogap/errors.hpp"

namespace nogap {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_shape(const Shape& shape, std::size_t n) {
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_to_string(shape));
  }
  if (shape_size(shape) != n) {
    throw ShapeError("tensor shape " + shape_to_string(shape) + " implies " +
                     std::to_string(shape_size(shape)) + " elements but buffer holds " +
                     std::to_string(n));
  }
}

}  // namespace

Tensor::Tensor() : data_(std::make_shared<const std::vector<double>>(1, 0.0)) {}

Tensor::Tensor(Shape shape, std::vector<double> data) {
  check_shape(shape, data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw DomainError("non-finite entry at flat index " + std::to_string(i) +
                        " in leaf tensor of shape " + shape_to_string(shape));
    }
  }
  shape_ = std::move(shape);
  data_ = std::make_shared<const std::vector<double>>(std::move(data));
}

Tensor::Tensor(Unchecked, Shape shape, std::shared_ptr<const std::vector<double>> data)
    : shape_(std::move(shape)), data_(std::move(data)) {}

Tensor Tensor::computed(Shape shape, std::vector<double> data) {
  check_shape(shape, data.size());
  return Tensor(Unchecked{}, std::move(shape),
                std::make_shared<const std::vector<double>>(std::move(data)));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     shape_to_string(shape_));
  }
  return shape_[axis];
}

double Tensor::item() const {
  if (size() != 1) {
    throw ShapeError("item() requires a single-element tensor, got shape " + shape_to_string(shape_));
  }
  return (*data_)[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  check_shape(shape, size());
  return Tensor(Unchecked{}, std::move(shape), data_);
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_->begin(), data_->end(), [](double v) { return std::isfinite(v); });
}

bool identical(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.raw(), b.raw(), a.size() * sizeof(double)) == 0;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("max_abs_diff: shapes " + shape_to_string(a.shape()) + " and " +
                     shape_to_string(b.shape()) + " differ");
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace nogap
