#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace plrp {

using Shape = std::vector<std::size_t>;

/// Number of elements described by a shape. The empty shape is a scalar.
std::size_t element_count(const Shape& shape) noexcept;
std::string to_string(const Shape& shape);

/// Dense row-major array of finite doubles (last axis fastest).
///
/// Tensors are immutable once built; every operation returns a new tensor.
/// Construction rejects NaN/Inf with a ValueError and a data length that
/// disagrees with the shape with a ShapeError.
class Tensor {
public:
  /// Empty tensor of shape [0].
  Tensor();
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, double value);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t extent(std::size_t axis) const;

  std::span<const double> values() const noexcept { return data_; }
  double operator[](std::size_t flat_index) const noexcept { return data_[flat_index]; }

  /// Element of a rank-3 [C,H,W] tensor.
  double at(std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }

  bool operator==(const Tensor& other) const = default;

private:
  Shape shape_;
  std::vector<double> data_;
};

/// Same data under a new shape; ShapeError if element counts differ.
Tensor reshape(const Tensor& t, Shape new_shape);

/// max(x, 0) elementwise.
Tensor truncate_positive(const Tensor& t);
/// min(x, 0) elementwise.
Tensor truncate_negative(const Tensor& t);

/// Sum accumulated left to right over the flat row-major sequence.
double sum(const Tensor& t) noexcept;
double sum(std::span<const double> values) noexcept;

/// Reduces one axis away. Each output element accumulates in increasing
/// index order along the reduced axis.
Tensor sum_along_axis(const Tensor& t, std::size_t axis);

} // namespace plrp
