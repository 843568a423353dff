#include "ember/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

#include "ember/errors.hpp"

namespace ember {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace detail {

std::vector<double>& Node::ensure_grad() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  return grad;
}

std::uint64_t next_seq() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

}  // namespace detail

namespace {
thread_local bool t_grad_enabled = true;

std::shared_ptr<detail::Node> new_node(Shape shape, std::vector<double> values) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor: shape " + shape_string(shape) + " holds " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->seq = detail::next_seq();
  return node;
}
}  // namespace

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const auto n = shape_numel(shape);
  return Tensor(new_node(std::move(shape), std::vector<double>(n, value)));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  return Tensor(new_node(std::move(shape), std::move(values)));
}

Tensor Tensor::scalar(double value) { return from({}, {value}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  auto t = from(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  return t;
}

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= node_->shape.size()) {
    throw DimensionError("tensor: axis " + std::to_string(axis) + " out of range for shape " +
                         shape_string(node_->shape));
  }
  return node_->shape[axis];
}

std::size_t Tensor::numel() const { return node_->data.size(); }

std::span<const double> Tensor::data() const { return node_->data; }

std::span<double> Tensor::mutable_data() {
  if (!node_->is_leaf()) throw StateError("tensor: cannot mutate the output of a recorded operation");
  return node_->data;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw DimensionError("tensor: item() on shape " + shape_string(shape()));
  }
  return node_->data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  const auto& s = shape();
  if (index.size() != s.size()) {
    throw DimensionError("tensor: index rank " + std::to_string(index.size()) +
                         " does not match shape " + shape_string(s));
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= s[axis]) {
      throw DimensionError("tensor: index " + std::to_string(i) + " out of range on axis " +
                           std::to_string(axis));
    }
    flat = flat * s[axis] + i;
    ++axis;
  }
  return node_->data[flat];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  if (!node_->is_leaf()) throw StateError("tensor: requires_grad can only be set on leaves");
  node_->requires_grad = flag;
}

bool Tensor::has_grad() const { return !node_->grad.empty(); }

std::span<const double> Tensor::grad() const { return node_->grad; }

std::span<double> Tensor::mutable_grad() { return node_->ensure_grad(); }

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

bool Tensor::is_leaf() const { return node_->is_leaf(); }

Tensor Tensor::detach() const { return from(shape(), node_->data); }

Tensor Tensor::make_result(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                           std::function<void(detail::Node&)> backward_fn) {
  auto node = new_node(std::move(shape), std::move(values));
  if (!t_grad_enabled) return Tensor(node);
  const bool any = std::any_of(parents.begin(), parents.end(),
                               [](const Tensor& p) { return p.requires_grad(); });
  if (!any) return Tensor(node);
  for (auto& p : parents) {
    if (p.node_->consumed) {
      throw StateError("tensor: operand belongs to a graph that was already back-propagated");
    }
    node->parents.push_back(p.node_);
  }
  node->requires_grad = true;
  node->backward_fn = std::move(backward_fn);
  return Tensor(node);
}

void Tensor::backward() {
  if (numel() != 1) {
    throw DimensionError("backward: root must hold exactly one element, got shape " +
                         shape_string(shape()));
  }
  if (node_->consumed) {
    throw StateError("backward: this graph was already back-propagated; rebuild it with a new forward pass");
  }
  if (!node_->requires_grad) {
    throw StateError("backward: root does not depend on any tensor that requires grad");
  }

  // Collect every node reachable through recorded edges. The shared handles keep
  // nodes alive while edges are released below.
  std::vector<std::shared_ptr<detail::Node>> order;
  std::vector<std::shared_ptr<detail::Node>> stack{node_};
  std::unordered_set<const detail::Node*> seen;
  while (!stack.empty()) {
    auto n = std::move(stack.back());
    stack.pop_back();
    if (seen.contains(n.get())) continue;
    seen.insert(n.get());
    for (auto& p : n->parents) {
      if (p->requires_grad && !seen.contains(p.get())) stack.push_back(p);
    }
    order.push_back(std::move(n));
  }
  // Sequence numbers are unique and increase with creation, so descending order
  // is a reverse topological order.
  std::sort(order.begin(), order.end(),
            [](const auto& a, const auto& b) { return a->seq > b->seq; });

  node_->ensure_grad()[0] += 1.0;
  for (auto& n : order) {
    if (!n->backward_fn) continue;
    n->ensure_grad();
    n->backward_fn(*n);
  }
  // Interior nodes release their closures and gradients; leaves keep their gradients.
  for (auto& n : order) {
    if (n->is_leaf()) continue;
    n->consumed = true;
    n->backward_fn = nullptr;
    n->parents.clear();
    std::vector<double>().swap(n->grad);
  }
}

}  // namespace ember
