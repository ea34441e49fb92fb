#include "mixvae/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

#include "mixvae/errors.hpp"

namespace mixvae {

namespace {

std::atomic<std::uint64_t> g_sequence{0};
thread_local bool t_grad_enabled = true;

const detail::Node& checked(const detail::NodePtr& node) {
  if (!node) throw UsageError("operation on an undefined tensor");
  return *node;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("Tensor::from: shape " + shape_str(shape) + " holds " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return wrap(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return checked(node_).shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return checked(node_).value.size(); }

std::span<const double> Tensor::data() const { return checked(node_).value; }

std::span<double> Tensor::mutable_data() {
  checked(node_);
  if (!node_->is_leaf()) throw UsageError("cannot mutate the value of a recorded op result");
  return node_->value;
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

bool Tensor::requires_grad() const { return checked(node_).requires_grad; }

void Tensor::set_requires_grad(bool on) {
  checked(node_);
  if (!node_->is_leaf()) throw UsageError("requires_grad can only be changed on leaf tensors");
  node_->requires_grad = on;
}

bool Tensor::has_grad() const {
  return checked(node_).grad.size() == node_->value.size() && !node_->value.empty();
}

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw UsageError("tensor has no gradient");
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
  checked(node_);
  return node_->ensure_grad();
}

void Tensor::zero_grad() {
  checked(node_);
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tape Tape::collect(const Tensor& root) {
  Tape tape;
  std::unordered_set<detail::Node*> seen;
  std::vector<detail::Node*> stack{root.node().get()};
  while (!stack.empty()) {
    detail::Node* n = stack.back();
    stack.pop_back();
    if (!n->requires_grad || !seen.insert(n).second) continue;
    tape.reverse_order.push_back(n);
    for (const auto& in : n->inputs) stack.push_back(in.get());
  }
  // Every op result is recorded after its inputs, so descending sequence is
  // the exact reverse of recording order. Leaves (sequence 0) come last.
  std::stable_sort(tape.reverse_order.begin(), tape.reverse_order.end(),
                   [](const detail::Node* a, const detail::Node* b) {
                     return a->sequence > b->sequence;
                   });
  return tape;
}

void Tensor::backward() const {
  const detail::Node& root = checked(node_);
  if (root.value.size() != 1) {
    throw UsageError("backward() requires a scalar loss, got shape " + shape_str(root.shape));
  }
  if (!root.requires_grad) throw UsageError("backward() on a tensor that does not require grad");
  if (root.backward_done) {
    throw UsageError("backward() already ran on this result; rebuild the graph to differentiate again");
  }
  Tape tape = Tape::collect(*this);
  for (detail::Node* n : tape.reverse_order) {
    if (!n->is_leaf()) n->grad.assign(n->value.size(), 0.0);
  }
  node_->ensure_grad()[0] += 1.0;
  for (detail::Node* n : tape.reverse_order) {
    if (n->is_leaf()) continue;
    for (const auto& in : n->inputs) {
      if (in->requires_grad) in->ensure_grad();
    }
    n->backward(*n);
  }
  node_->backward_done = true;
}

Tensor Tensor::detach() const {
  return from(shape(), node_->value, false);
}

Tensor Tensor::reshape(Shape new_shape) const {
  if (shape_numel(new_shape) != numel()) {
    throw ShapeError("reshape " + shape_str(shape()) + " -> " + shape_str(new_shape));
  }
  return detail::make_result(std::move(new_shape), node_->value, {*this}, [](detail::Node& self) {
    auto& g = self.inputs[0]->grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

namespace detail {

Tensor make_result(Shape shape, std::vector<double> value, std::initializer_list<Tensor> inputs,
                   BackwardFn backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool needs = false;
  if (t_grad_enabled) {
    for (const Tensor& t : inputs) needs = needs || checked(t.node()).requires_grad;
  }
  if (needs) {
    node->requires_grad = true;
    node->sequence = ++g_sequence;
    node->inputs.reserve(inputs.size());
    for (const Tensor& t : inputs) node->inputs.push_back(t.node());
    node->backward = std::move(backward);
  }
  return Tensor::wrap(std::move(node));
}

}  // namespace detail

}  // namespace mixvae
