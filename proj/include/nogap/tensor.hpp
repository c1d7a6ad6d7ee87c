#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace nogap {

using Shape = std::vector<std::size_t>;

/// Number of elements implied by a shape; the empty shape is a scalar.
std::size_t shape_size(const Shape& shape);

std::string shape_to_string(const Shape& shape);

/// Immutable dense row-major array of doubles.
///
/// Copies share the underlying buffer, so a Tensor can be passed around by
/// value and read from several threads at once.
class Tensor {
 public:
  /// Scalar zero.
  Tensor();

  /// Leaf constructor. Throws ShapeError when the buffer does not match the
  /// shape and DomainError when any entry is NaN or infinite.
  Tensor(Shape shape, std::vector<double> data);

  /// Wraps the result of a computation without the finiteness check so that
  /// non-finite values propagate to whoever inspects them.
  static Tensor computed(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_->size(); }
  std::size_t dim(std::size_t axis) const;

  std::span<const double> data() const noexcept { return *data_; }
  const double* raw() const noexcept { return data_->data(); }
  double operator[](std::size_t i) const { return (*data_)[i]; }

  /// Value of a single-element tensor.
  double item() const;

  /// Same buffer viewed with a different shape of equal element count.
  Tensor reshaped(Shape shape) const;

  /// Deep copy of the payload for callers that want to mutate it.
  std::vector<double> to_vector() const { return *data_; }

  bool all_finite() const noexcept;

 private:
  struct Unchecked {};
  Tensor(Unchecked, Shape shape, std::shared_ptr<const std::vector<double>> data);

  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
};

/// Bitwise equality of shape and payload.
bool identical(const Tensor& a, const Tensor& b);

/// Max absolute elementwise difference; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace nogap
