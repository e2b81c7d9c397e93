#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "cfsdcn/array.hpp"

namespace cfsdcn {

template <typename T>
struct Node;

/// Backward closure: reads `self.grad` and accumulates into the inputs.
template <typename T>
using BackwardFn = std::function<void(Node<T>& self)>;

/// One recorded operation (or a leaf). `seq` is assigned from a
/// monotonically increasing counter, so descending `seq` over the nodes
/// reachable from a root is a valid reverse topological order.
template <typename T>
struct Node {
  Array4<T> value;
  Array4<T> grad;
  bool requires_grad = false;
  std::uint64_t seq = 0;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node<T>>> inputs;
  BackwardFn<T> backward;

  /// Zero-initialized gradient buffer, allocated on first use.
  Array4<T>& grad_buffer();
};

/// Handle to a node of the dynamic graph. Copies share the node.
/// A default-constructed Tensor is "undefined" (used for absent biases).
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor leaf(Array4<T> value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape4& shape() const { return node_->value.shape(); }
  const Array4<T>& value() const { return node_->value; }
  /// Mutable access for optimizers and initializers; never call on a
  /// non-leaf whose graph is still pending backward.
  Array4<T>& mutable_value() { return node_->value; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return !node_->grad.empty(); }
  const Array4<T>& grad() const { return node_->grad; }
  // Handles share their node; backward closures hold const copies.
  Array4<T>& grad_buffer() const { return node_->grad_buffer(); }
  void zero_grad();

  /// Seeds d(root)/d(root) = 1 for a single-element tensor and runs the tape.
  void backward();
  /// Runs the tape with an explicit upstream gradient.
  void backward(const Array4<T>& seed);

  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Reverse-mode replay of everything reachable from a root.
template <typename T>
class Tape {
 public:
  /// Collects the nodes that require grad and are reachable from `root`,
  /// ordered for replay (latest recorded first).
  static std::vector<Node<T>*> record(const std::shared_ptr<Node<T>>& root);
  static void run(const std::shared_ptr<Node<T>>& root, const Array4<T>& seed);
};

/// True unless a NoGradGuard is alive on this thread.
bool grad_enabled();

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

std::uint64_t next_sequence();

/// Wraps a freshly computed value into a graph node. The node records
/// `backward` only when grad mode is on and some input requires grad.
template <typename T>
Tensor<T> make_result(Array4<T> value, const char* op,
                      std::initializer_list<Tensor<T>> inputs,
                      BackwardFn<T> backward);

extern template struct Node<float>;
extern template struct Node<double>;
extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace cfsdcn
