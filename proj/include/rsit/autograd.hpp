#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "rsit/tensor.hpp"

namespace rsit {

class Var;

namespace detail {

struct Node;
using BackwardFn = std::function<void(const Tensor& grad_out, std::vector<Var>& inputs)>;

struct Node {
  Tensor value;
  Tensor grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<Var> inputs;
  BackwardFn backward;
};

}  // namespace detail

/// Handle to a value in the reverse-mode autodiff graph. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor& value() const { return node_->value; }
  /// In-place access for optimizers and checkpoint loading; never use mid-graph.
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  double item() const;

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool is_leaf() const { return !node_->backward; }

  bool has_grad() const { return !node_->grad.empty(); }
  /// Gradient, or zeros of the value's shape when nothing was accumulated.
  Tensor grad() const;
  Tensor& grad_buffer();
  void accumulate_grad(const Tensor& g);
  void zero_grad();

  Var detach() const { return Var(node_->value, false); }

  detail::Node* node() const { return node_.get(); }

 private:
  friend Var make_result(Tensor, std::vector<Var>, detail::BackwardFn);
  std::shared_ptr<detail::Node> node_;
};

/// Builds a graph node. The backward closure is dropped when no input needs grad
/// or when gradient recording is disabled.
Var make_result(Tensor value, std::vector<Var> inputs, detail::BackwardFn backward);

/// Reverse sweep from a scalar root with seed d(root) = `seed`.
/// Consumes the graph: interior closures and gradients are released afterwards.
void backward(const Var& root, double seed = 1.0);
void backward(const Var& root, const Tensor& seed);

bool grad_enabled();

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace rsit
