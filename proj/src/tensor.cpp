#include "vhd/tensor.hpp"

#include <cmath>
#include <sstream>

namespace vhd {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ShapeError("shape dimensions must be positive, got " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : shape_(std::move(shape)), data_(std::move(data)), requires_grad_(requires_grad) {
  const std::int64_t n = shape_numel(shape_);
  if (n != static_cast<std::int64_t>(data_.size())) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_str(shape_));
  }
}

Tensor Tensor::zeros(Shape shape) {
  const std::int64_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), 0.0));
}

Tensor Tensor::full(Shape shape, double value) {
  const std::int64_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), value));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::vec(std::vector<double> values) {
  const int n = static_cast<int>(values.size());
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(int rows, int cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::rand_uniform(Shape shape, Rng& rng, double lo, double hi) {
  Tensor t = zeros(std::move(shape));
  for (double& x : t.raw()) x = rng.next_uniform(lo, hi);
  return t;
}

Tensor Tensor::rand_gaussian(Shape shape, Rng& rng, double mean, double stddev) {
  Tensor t = zeros(std::move(shape));
  for (double& x : t.raw()) x = mean + stddev * rng.next_gaussian();
  return t;
}

int Tensor::rows() const {
  if (rank() != 2) throw ShapeError("rows(): tensor is not rank-2, shape " + shape_str(shape_));
  return shape_[0];
}

int Tensor::cols() const {
  if (rank() != 2) throw ShapeError("cols(): tensor is not rank-2, shape " + shape_str(shape_));
  return shape_[1];
}

double Tensor::value() const {
  if (numel() != 1) {
    throw ContractError("value(): tensor is not scalar, shape " + shape_str(shape_));
  }
  return data_[0];
}

bool all_finite(const Tensor& t) {
  for (double x : t.data()) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape() == b.shape(); }

}  // namespace vhd
