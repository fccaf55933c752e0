#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "snn/tensor.hpp"

namespace snn {

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  bool valid() const { return tape_ != nullptr; }
  std::size_t id() const { return id_; }
  Tape& tape() const { return *tape_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// What a backward rule sees: the output gradient, its inputs' values, and
/// writable gradient buffers for the inputs that participate in the graph.
class BackwardContext {
 public:
  std::span<const double> out_grad() const { return out_grad_; }
  const Tensor& output() const;
  const Tensor& input(std::size_t k) const;
  bool needs_grad(std::size_t k) const;
  /// Accumulation buffer for input k; empty when !needs_grad(k).
  std::span<double> input_grad(std::size_t k);

 private:
  friend class Tape;
  BackwardContext(Tape& tape, std::size_t node, std::span<const double> out_grad)
      : tape_(tape), node_(node), out_grad_(out_grad) {}

  Tape& tape_;
  std::size_t node_;
  std::span<const double> out_grad_;
};

using BackwardRule = std::function<void(BackwardContext&)>;

/// Define-by-run reverse-mode tape.
///
/// Nodes are appended in execution order, so every node's inputs precede it.
/// Values live in a deque and keep stable addresses while the tape grows.
/// A tape is not thread-safe; use one tape per thread.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives a gradient.
  Var constant(Tensor value);
  /// Leaf whose gradient is kept on the tape (see grad()).
  Var variable(Tensor value);
  /// Leaf bound to an external parameter; backward() adds into param.grad().
  /// The parameter must outlive the backward() call.
  Var parameter(Tensor& param);

  /// Append an operation node. The rule is dropped when no input needs grad.
  Var record(Tensor value, std::vector<Var> inputs, BackwardRule rule);

  /// Reverse sweep from a scalar loss. Each node is visited once.
  void backward(const Var& loss);

  /// Gradient accumulated for `v` by the last backward(); empty if none.
  /// Empty when no gradient reached v during the last backward().
  std::span<const double> grad(const Var& v) const;

  std::size_t size() const { return nodes_.size(); }

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

 private:
  friend class BackwardContext;

  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardRule rule;
    Tensor* sink = nullptr;
    bool requires_grad = false;
    std::vector<double> grad;
  };

  Var push(Node node);
  std::vector<double>& grad_buffer(std::size_t id);

  std::deque<Node> nodes_;
};

}  // namespace snn
