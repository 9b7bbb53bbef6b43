#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mvcl::ad {

using Shape = std::vector<std::size_t>;

std::size_t NumElements(const Shape& shape);
std::string ShapeString(const Shape& shape);

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until first needed
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
  const char* op = "leaf";

  std::vector<T>& EnsureGrad() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    return grad;
  }
};

/// Handle to a node of the computation graph. Copies share the node.
/// T is float for training graphs and double for verification graphs.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor Constant(Shape shape, std::vector<T> values);
  static Tensor Zeros(Shape shape);
  static Tensor Full(Shape shape, T fill);
  static Tensor Scalar(T value);
  /// Leaf that receives gradients; its grad buffer starts at zero.
  static Tensor Parameter(Shape shape, std::vector<T> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  /// Size of `axis`; negative values count from the back.
  std::size_t dim(int axis) const;
  std::size_t size() const { return node_->value.size(); }

  std::span<const T> data() const { return node_->value; }
  std::span<T> mutable_data() { return node_->value; }
  /// Zeros when no gradient has reached this tensor.
  std::span<const T> grad() const { return node_->EnsureGrad(); }
  std::span<T> mutable_grad() { return node_->EnsureGrad(); }
  bool requires_grad() const { return node_->requires_grad; }
  void ZeroGrad();

  T item() const;
  T at(std::size_t flat_index) const { return node_->value[flat_index]; }
  /// Constant copy of the current value, cut from the graph.
  Tensor Detach() const;

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Runs reverse-mode differentiation from a scalar loss. Each node's rule
/// runs exactly once, in reverse topological order; gradients accumulate
/// into every requires_grad leaf reachable from the loss.
template <typename T>
void Backward(const Tensor<T>& loss);

/// While alive, new operations on this thread record no backward rules.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool GradEnabled();

template <typename To, typename From>
std::vector<To> CastVector(std::span<const From> in) {
  return std::vector<To>(in.begin(), in.end());
}

}  // namespace mvcl::ad
