#include "vhd/tape.hpp"

namespace vhd {

Tensor Tape::watch(const Tensor& t) {
  Tensor out = t;
  out.set_requires_grad(true);
  out.set_node(push({}, t.numel(), nullptr));
  return out;
}

std::int64_t Tape::push(std::vector<std::int64_t> parents, std::int64_t numel, BackFn back) {
  nodes_.push_back(Node{std::move(parents), numel, std::move(back)});
  return static_cast<std::int64_t>(nodes_.size()) - 1;
}

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ContractError("backward: loss must be scalar, shape " + shape_str(loss.shape()));
  }
  if (!loss.on_tape()) {
    throw ContractError("backward: loss is not connected to this tape");
  }
  grads_.assign(nodes_.size(), {});
  grad_buf(loss.node())[0] = 1.0;
  for (std::int64_t i = static_cast<std::int64_t>(nodes_.size()) - 1; i >= 0; --i) {
    const Node& node = nodes_[static_cast<std::size_t>(i)];
    if (!node.back) continue;
    const auto& g = grads_[static_cast<std::size_t>(i)];
    if (g.empty()) continue;  // not reachable from the loss
    node.back(g, *this);
  }
  swept_ = true;
}

Tensor Tape::grad(const Tensor& t) const {
  if (!swept_) throw ContractError("grad: backward() has not been run on this tape");
  if (!t.on_tape() || t.node() >= static_cast<std::int64_t>(nodes_.size())) {
    throw ContractError("grad: tensor is not on this tape");
  }
  const auto& buf = grads_[static_cast<std::size_t>(t.node())];
  if (buf.empty()) return Tensor::zeros(t.shape());
  return Tensor(t.shape(), buf);
}

std::vector<double>& Tape::grad_buf(std::int64_t node) {
  auto& buf = grads_[static_cast<std::size_t>(node)];
  if (buf.empty()) buf.assign(static_cast<std::size_t>(nodes_[static_cast<std::size_t>(node)].numel), 0.0);
  return buf;
}

}  // namespace vhd
