#include "rsit/autograd.hpp"

#include <unordered_set>

namespace rsit {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<detail::Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

double Var::item() const {
  if (node_->value.size() != 1) {
    throw ShapeError("item() on tensor of shape " + shape_str(node_->value.shape()));
  }
  return node_->value[0];
}

Tensor Var::grad() const {
  if (node_->grad.empty()) return Tensor::zeros(node_->value.shape());
  return node_->grad;
}

Tensor& Var::grad_buffer() {
  if (node_->grad.empty()) node_->grad = Tensor::zeros(node_->value.shape());
  return node_->grad;
}

void Var::accumulate_grad(const Tensor& g) { grad_buffer() += g; }

void Var::zero_grad() { node_->grad = Tensor(); }

Var make_result(Tensor value, std::vector<Var> inputs, detail::BackwardFn backward) {
  Var out(std::move(value), false);
  if (!g_grad_enabled) return out;
  bool any = false;
  for (const Var& v : inputs) any = any || v.requires_grad();
  if (!any) return out;
  out.node_->requires_grad = true;
  out.node_->inputs = std::move(inputs);
  out.node_->backward = std::move(backward);
  return out;
}

namespace {

// Post-order over nodes that require grad; reversed it is a valid sweep order.
// Holding Vars keeps every node alive while the sweep releases interior edges.
std::vector<Var> topo_order(const Var& root) {
  std::vector<Var> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<Var, std::size_t>> stack{{root, 0}};
  seen.insert(root.node());
  while (!stack.empty()) {
    detail::Node* node = stack.back().first.node();
    std::size_t& next = stack.back().second;
    if (next < node->inputs.size()) {
      const Var& child = node->inputs[next++];
      if (child.requires_grad() && seen.insert(child.node()).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(std::move(stack.back().first));
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace

void backward(const Var& root, double seed) {
  if (root.value().size() != 1) {
    throw ShapeError("backward(seed scalar) needs a scalar root, got " + shape_str(root.shape()));
  }
  backward(root, Tensor::full(root.shape(), seed));
}

void backward(const Var& root, const Tensor& seed) {
  if (!root.requires_grad()) return;
  if (!seed.same_shape(root.value())) {
    throw ShapeError("backward seed " + shape_str(seed.shape()) + " vs root " +
                     shape_str(root.shape()));
  }
  Var r = root;
  r.accumulate_grad(seed);
  auto order = topo_order(root);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = it->node();
    if (!node->backward) continue;
    if (!node->grad.empty()) node->backward(node->grad, node->inputs);
    node->backward = nullptr;
    node->inputs.clear();
    node->grad = Tensor();
  }
}

}  // namespace rsit
