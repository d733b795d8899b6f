#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vhd/errors.hpp"
#include "vhd/rng.hpp"

namespace vhd {

using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major tensor of 64-bit floats. Value-semantic: copies are
// independent. `node()` links a value to the GradTape that produced or
// watched it (-1 = not on any tape).
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor vec(std::vector<double> values);
  static Tensor matrix(int rows, int cols, std::vector<double> values);
  static Tensor rand_uniform(Shape shape, Rng& rng, double lo, double hi);
  static Tensor rand_gaussian(Shape shape, Rng& rng, double mean, double stddev);

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  int rows() const;
  int cols() const;
  bool is_scalar() const { return data_.size() == 1 && rank() <= 1; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& raw() { return data_; }

  double value() const;  // scalar tensors only

  double operator()(int i) const { return data_[static_cast<std::size_t>(i)]; }
  double& operator()(int i) { return data_[static_cast<std::size_t>(i)]; }
  double operator()(int r, int c) const {
    return data_[static_cast<std::size_t>(r) * shape_[1] + c];
  }
  double& operator()(int r, int c) {
    return data_[static_cast<std::size_t>(r) * shape_[1] + c];
  }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool v) { requires_grad_ = v; }

  std::int64_t node() const { return node_; }
  void set_node(std::int64_t node) { node_ = node; }
  bool on_tape() const { return node_ >= 0; }

 private:
  Shape shape_;
  std::vector<double> data_;
  bool requires_grad_ = false;
  std::int64_t node_ = -1;
};

bool all_finite(const Tensor& t);
bool same_shape(const Tensor& a, const Tensor& b);

}  // namespace vhd
