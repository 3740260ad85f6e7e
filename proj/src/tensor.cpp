#include "plrp/tensor.hpp"

#include "plrp/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace plrp {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
  case ErrorKind::shape: return "shape";
  case ErrorKind::parse: return "parse";
  case ErrorKind::bounds: return "bounds";
  case ErrorKind::dtype: return "dtype";
  case ErrorKind::structure: return "structure";
  case ErrorKind::io: return "io";
  case ErrorKind::value: return "value";
  case ErrorKind::propagation: return "propagation";
  }
  return "unknown";
}

std::size_t element_count(const Shape& shape) noexcept {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor() : shape_{0} {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (element_count(shape_) != data_.size()) {
    throw ShapeError("tensor shape " + to_string(shape_) + " needs " +
                     std::to_string(element_count(shape_)) + " elements, got " +
                     std::to_string(data_.size()));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw ValueError("non-finite tensor element at flat index " + std::to_string(i));
    }
  }
}

Tensor Tensor::zeros(Shape shape) {
  return filled(std::move(shape), 0.0);
}

Tensor Tensor::filled(Shape shape, double value) {
  std::vector<double> data(element_count(shape), value);
  return Tensor(std::move(shape), std::move(data));
}

std::size_t Tensor::extent(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for rank " +
                     std::to_string(shape_.size()));
  }
  return shape_[axis];
}

Tensor reshape(const Tensor& t, Shape new_shape) {
  if (element_count(new_shape) != t.size()) {
    throw ShapeError("cannot reshape " + to_string(t.shape()) + " to " + to_string(new_shape));
  }
  return Tensor(std::move(new_shape), std::vector<double>(t.values().begin(), t.values().end()));
}

Tensor truncate_positive(const Tensor& t) {
  std::vector<double> out(t.size());
  std::transform(t.values().begin(), t.values().end(), out.begin(),
                 [](double v) { return v > 0.0 ? v : 0.0; });
  return Tensor(t.shape(), std::move(out));
}

Tensor truncate_negative(const Tensor& t) {
  std::vector<double> out(t.size());
  std::transform(t.values().begin(), t.values().end(), out.begin(),
                 [](double v) { return v < 0.0 ? v : 0.0; });
  return Tensor(t.shape(), std::move(out));
}

double sum(std::span<const double> values) noexcept {
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc;
}

double sum(const Tensor& t) noexcept {
  return sum(t.values());
}

Tensor sum_along_axis(const Tensor& t, std::size_t axis) {
  if (axis >= t.rank()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for rank " +
                     std::to_string(t.rank()));
  }
  const Shape& shape = t.shape();
  std::size_t outer = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= shape[a];
  std::size_t inner = 1;
  for (std::size_t a = axis + 1; a < shape.size(); ++a) inner *= shape[a];
  const std::size_t extent = shape[axis];

  Shape out_shape;
  for (std::size_t a = 0; a < shape.size(); ++a) {
    if (a != axis) out_shape.push_back(shape[a]);
  }
  std::vector<double> out(outer * inner, 0.0);
  auto data = t.values();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < extent; ++k) acc += data[(o * extent + k) * inner + i];
      out[o * inner + i] = acc;
    }
  }
  return Tensor(std::move(out_shape), std::move(out));
}

} // namespace plrp
