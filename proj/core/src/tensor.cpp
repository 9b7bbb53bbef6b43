#include "mvcl/tensor.hpp"

#include <unordered_set>

#include "mvcl/error.hpp"

namespace mvcl::ad {
namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t NumElements(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string ShapeString(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool GradEnabled() { return g_grad_enabled; }

template <typename T>
Tensor<T> Tensor<T>::Constant(Shape shape, std::vector<T> values) {
  if (NumElements(shape) != values.size()) {
    Fail(ErrorCode::kShapeMismatch, "shape " + ShapeString(shape) + " needs " +
                                        std::to_string(NumElements(shape)) + " values, got " +
                                        std::to_string(values.size()));
  }
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::Zeros(Shape shape) {
  return Full(std::move(shape), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::Full(Shape shape, T fill) {
  const std::size_t n = NumElements(shape);
  return Constant(std::move(shape), std::vector<T>(n, fill));
}

template <typename T>
Tensor<T> Tensor<T>::Scalar(T value) {
  return Constant({}, {value});
}

template <typename T>
Tensor<T> Tensor<T>::Parameter(Shape shape, std::vector<T> values) {
  Tensor t = Constant(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  t.node_->EnsureGrad();
  return t;
}

template <typename T>
std::size_t Tensor<T>::dim(int axis) const {
  const int r = static_cast<int>(rank());
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) Fail(ErrorCode::kShapeMismatch, "axis out of range for " + ShapeString(shape()));
  return node_->shape[a];
}

template <typename T>
void Tensor<T>::ZeroGrad() {
  auto& g = node_->EnsureGrad();
  std::fill(g.begin(), g.end(), T(0));
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1) Fail(ErrorCode::kShapeMismatch, "item() on tensor of shape " + ShapeString(shape()));
  return node_->value[0];
}

template <typename T>
Tensor<T> Tensor<T>::Detach() const {
  return Constant(shape(), node_->value);
}

template <typename T>
void Backward(const Tensor<T>& loss) {
  if (loss.size() != 1) {
    Fail(ErrorCode::kNonScalarLoss, "backward needs a scalar, got " + ShapeString(loss.shape()));
  }
  Node<T>* root = loss.node();
  if (!root->requires_grad) return;

  // Iterative post-order DFS yields a topological order (parents first).
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{root, 0}};
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.push_back({parent, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->EnsureGrad()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backward) node->backward(*node);
  }
  // Interior gradients are consumed; release them so a graph can be reused.
  for (Node<T>* node : order) {
    if (node->backward) std::vector<T>().swap(node->grad);
  }
}

template class Tensor<float>;
template class Tensor<double>;
template void Backward<float>(const Tensor<float>&);
template void Backward<double>(const Tensor<double>&);

}  // namespace mvcl::ad
