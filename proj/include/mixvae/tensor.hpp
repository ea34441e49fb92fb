#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mixvae {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// Propagates `self.grad` into the grads of `self.inputs`.
using BackwardFn = std::function<void(Node& self)>;

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first needed
  bool requires_grad = false;
  bool backward_done = false;
  std::uint64_t sequence = 0;  // recording order; 0 for leaves
  std::vector<NodePtr> inputs;
  BackwardFn backward;

  bool is_leaf() const { return !backward; }
  std::vector<double>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

/// Dense row-major array of doubles that can take part in reverse-mode
/// differentiation.
///
/// Tensors are handles: copying a Tensor shares the underlying storage. An
/// operation applied to tensors that require gradients records a node on the
/// implicit tape; `backward()` on a scalar result replays the recorded
/// adjoints in reverse recording order.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<const double> data() const;
  /// Writable view of a leaf tensor's values. Mutating an op result would
  /// invalidate the recorded graph, so that is rejected.
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t flat_index) const { return data()[flat_index]; }

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Runs reverse-mode differentiation from this scalar. Every reachable
  /// tensor that requires gradients ends up with d(this)/d(tensor) added to
  /// its gradient (leaves accumulate, intermediates are reset first).
  /// Calling backward twice on the same result is rejected.
  void backward() const;

  /// Value copy without graph history.
  Tensor detach() const;
  /// Same values, new shape with equal element count. Differentiable.
  Tensor reshape(Shape shape) const;

  const detail::NodePtr& node() const { return node_; }
  static Tensor wrap(detail::NodePtr node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

 private:
  detail::NodePtr node_;
};

/// Result of topologically ordering a graph: nodes in reverse recording order.
struct Tape {
  std::vector<detail::Node*> reverse_order;
  static Tape collect(const Tensor& root);
};

bool grad_enabled();

/// Disables graph recording for its lifetime (evaluation passes).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace detail {

/// Builds an op result; records `backward` only when a gradient is needed.
Tensor make_result(Shape shape, std::vector<double> value,
                   std::initializer_list<Tensor> inputs, BackwardFn backward);

}  // namespace detail

}  // namespace mixvae
