#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "vhd/tensor.hpp"

namespace vhd {

// Ordered record of the differentiable ops executed against it. Creation
// order is a topological order, so one reverse sweep accumulates exactly one
// gradient buffer per node. A tape is confined to one logical thread.
class Tape {
 public:
  // Called during the reverse sweep with this node's accumulated gradient;
  // must add contributions into parent buffers via grad_buf().
  using BackFn = std::function<void(const std::vector<double>& out_grad, Tape& tape)>;

  // Registers a leaf; the returned tensor carries the node id.
  Tensor watch(const Tensor& t);

  // Records an op node. Parents may be -1 (off-tape input). Returns node id.
  std::int64_t push(std::vector<std::int64_t> parents, std::int64_t numel, BackFn back);

  // Reverse-mode sweep from a scalar loss on this tape.
  void backward(const Tensor& loss);

  // Gradient of the loss w.r.t. a watched/recorded tensor. Zero if the node
  // was never reached by the sweep.
  Tensor grad(const Tensor& t) const;

  // Accumulation buffer for `node`; zero-initialized on first access.
  std::vector<double>& grad_buf(std::int64_t node);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::vector<std::int64_t> parents;
    std::int64_t numel;
    BackFn back;
  };

  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
  bool swept_ = false;
};

}  // namespace vhd
