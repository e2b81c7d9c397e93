#include "cfsdcn/autodiff.hpp"

#include <algorithm>
#include <unordered_set>

namespace cfsdcn {

namespace {
thread_local bool t_grad_enabled = true;
thread_local std::uint64_t t_sequence = 0;
}  // namespace

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) {
  t_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

std::uint64_t next_sequence() { return ++t_sequence; }

template <typename T>
Array4<T>& Node<T>::grad_buffer() {
  if (grad.empty() && value.numel() > 0) {
    grad = Array4<T>(value.shape());
  }
  return grad;
}

template <typename T>
Tensor<T> Tensor<T>::leaf(Array4<T> value, bool requires_grad) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  node->seq = next_sequence();
  return Tensor<T>(std::move(node));
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (!node_->grad.empty()) node_->grad.fill(T{0});
}

template <typename T>
void Tensor<T>::backward() {
  if (node_->value.numel() != 1) {
    throw ShapeError("backward() without a seed needs a single-element root, got " +
                     shape().str());
  }
  Tape<T>::run(node_, Array4<T>(shape(), T{1}));
}

template <typename T>
void Tensor<T>::backward(const Array4<T>& seed) {
  Tape<T>::run(node_, seed);
}

template <typename T>
std::vector<Node<T>*> Tape<T>::record(const std::shared_ptr<Node<T>>& root) {
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<Node<T>*> stack{root.get()};
  while (!stack.empty()) {
    Node<T>* node = stack.back();
    stack.pop_back();
    if (!node->requires_grad || !seen.insert(node).second) continue;
    order.push_back(node);
    for (const auto& in : node->inputs) stack.push_back(in.get());
  }
  std::sort(order.begin(), order.end(),
            [](const Node<T>* a, const Node<T>* b) { return a->seq > b->seq; });
  return order;
}

template <typename T>
void Tape<T>::run(const std::shared_ptr<Node<T>>& root, const Array4<T>& seed) {
  require_same_shape(seed.shape(), root->value.shape(), "backward seed");
  if (!root->requires_grad) return;
  const auto order = record(root);
  Array4<T>& g = root->grad_buffer();
  for (std::size_t i = 0; i < g.numel(); ++i) g[i] += seed[i];
  for (Node<T>* node : order) {
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

template <typename T>
Tensor<T> make_result(Array4<T> value, const char* op,
                      std::initializer_list<Tensor<T>> inputs,
                      BackwardFn<T> backward) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->op = op;
  node->seq = next_sequence();
  bool needs = false;
  if (grad_enabled()) {
    for (const auto& in : inputs) {
      if (in.defined() && in.requires_grad()) needs = true;
    }
  }
  if (needs) {
    node->requires_grad = true;
    for (const auto& in : inputs) {
      if (in.defined()) node->inputs.push_back(in.node());
    }
    node->backward = std::move(backward);
  }
  return Tensor<T>(std::move(node));
}

template struct Node<float>;
template struct Node<double>;
template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;
template Tensor<float> make_result(Array4<float>, const char*,
                                   std::initializer_list<Tensor<float>>,
                                   BackwardFn<float>);
template Tensor<double> make_result(Array4<double>, const char*,
                                    std::initializer_list<Tensor<double>>,
                                    BackwardFn<double>);

}  // namespace cfsdcn
