#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "duo/numerics/kernels.hpp"
#include "duo/numerics/tensor.hpp"

namespace duo {

class Tape;

// Handle to a node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = std::numeric_limits<std::size_t>::max();

  bool valid() const noexcept { return tape != nullptr; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

// Reverse-mode record. Nodes are appended in evaluation order, which is a
// topological order, so backward walks them once from the back.
class Tape {
  struct Node;

public:
  // View handed to a node's backward rule: its inputs' values and the
  // gradient accumulators for those inputs.
  class Grads {
  public:
    const Tensor& in(std::size_t i) const { return tape_->nodes_[node_.inputs[i]].value; }
    const Tensor& out() const { return node_.value; }
    bool needs(std::size_t i) const { return tape_->nodes_[node_.inputs[i]].needs_grad; }

    // Gradient buffer of input `i`, zero-filled on first use.
    Tensor& at(std::size_t i) {
      auto& g = (*grads_)[node_.inputs[i]];
      if (g.empty()) g = Tensor::zeros(in(i).shape());
      return g;
    }

  private:
    friend class Tape;
    Grads(const Tape* tape, const Node& node, std::vector<Tensor>* grads)
        : tape_(tape), node_(node), grads_(grads) {}
    const Tape* tape_;
    const Node& node_;
    std::vector<Tensor>* grads_;
  };

  using BackwardFn = std::function<void(const Tensor& grad_out, Grads& grads)>;

private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool needs_grad = false;
    long slot = -1;
  };

public:

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value) { return append(std::move(value), {}, nullptr, false); }

  // Leaf bound to parameter `slot`; backward returns one gradient per slot.
  Var parameter(Tensor value, std::size_t slot) {
    Var v = append(std::move(value), {}, nullptr, true);
    nodes_[v.id].slot = static_cast<long>(slot);
    return v;
  }

  Var push(Tensor value, std::vector<std::size_t> inputs, BackwardFn fn) {
    bool needs = false;
    for (auto i : inputs) needs = needs || nodes_.at(i).needs_grad;
    return append(std::move(value), std::move(inputs), needs ? std::move(fn) : nullptr, needs);
  }

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // d(loss)/d(parameter) per slot. Slots bound on the tape but not reached
  // from the loss get zeros; slots never bound stay empty.
  std::vector<Tensor> backward(Var loss, std::size_t n_slots) const {
    if (loss.tape != this) throw ContractError("backward: loss recorded on a different tape");
    if (value(loss).size() != 1)
      throw ContractError("backward: loss must be a scalar, got shape " + shape_str(value(loss).shape()));
    std::vector<Tensor> grads(nodes_.size());
    grads[loss.id] = Tensor(value(loss).shape(), 1.0);
    std::vector<Tensor> out(n_slots);
    for (std::size_t id = loss.id + 1; id-- > 0;) {
      const Node& n = nodes_[id];
      if (n.slot >= 0) {
        const auto s = static_cast<std::size_t>(n.slot);
        if (s >= n_slots) throw ContractError("backward: parameter slot beyond n_slots");
        if (!grads[id].empty()) {
          if (out[s].empty()) out[s] = std::move(grads[id]);
          else kernels::axpy(1.0, grads[id].data(), out[s].data());
        }
        continue;
      }
      if (!n.backward || grads[id].empty()) continue;
      Grads g(this, n, &grads);
      n.backward(grads[id], g);
      grads[id] = Tensor();
    }
    for (const Node& n : nodes_)
      if (n.slot >= 0 && out[static_cast<std::size_t>(n.slot)].empty())
        out[static_cast<std::size_t>(n.slot)] = Tensor::zeros(n.value.shape());
    return out;
  }

private:
  Var append(Tensor value, std::vector<std::size_t> inputs, BackwardFn fn, bool needs) {
    nodes_.push_back(Node{std::move(value), std::move(inputs), std::move(fn), needs, -1});
    return Var{this, nodes_.size() - 1};
  }

  // deque keeps node addresses stable while the tape grows
  std::deque<Node> nodes_;
};

inline const Tensor& Var::value() const {
  if (!tape) throw ContractError("use of an unbound Var");
  return tape->value(*this);
}

} // namespace duo
