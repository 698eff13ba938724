#include "fliplog/tensor.hpp"

#include <sstream>
#include <unordered_set>
#include <utility>

#include "fliplog/errors.hpp"

namespace fliplog {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (std::int64_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace detail {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

}  // namespace detail

NoGradGuard::NoGradGuard() : previous_(detail::grad_enabled()) {
  detail::g_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() { detail::g_grad_enabled = previous_; }

Tensor::Tensor(Shape shape, bool requires_grad)
    : impl_(std::make_shared<detail::TensorImpl>()) {
  for (std::int64_t d : shape) {
    if (d < 0) throw ShapeError("negative extent in shape " + shape_str(shape));
  }
  impl_->shape = std::move(shape);
  impl_->data.assign(static_cast<std::size_t>(shape_numel(impl_->shape)), 0.0);
  impl_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : impl_(std::make_shared<detail::TensorImpl>()) {
  if (shape_numel(shape) != static_cast<std::int64_t>(values.size())) {
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not fill shape " + shape_str(shape));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return Tensor(std::move(shape), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t(std::move(shape), requires_grad);
  for (double& x : t.data()) x = value;
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
  if (!impl_) throw ContractError("use of undefined tensor");
  return impl_->shape;
}

std::int64_t Tensor::numel() const {
  return static_cast<std::int64_t>(impl_ ? impl_->data.size() : 0);
}

std::span<double> Tensor::data() {
  if (!impl_) throw ContractError("use of undefined tensor");
  return impl_->data;
}

std::span<const double> Tensor::data() const {
  if (!impl_) throw ContractError("use of undefined tensor");
  return impl_->data;
}

double& Tensor::at(std::initializer_list<std::int64_t> idx) {
  std::int64_t flat = 0;
  std::size_t axis = 0;
  for (std::int64_t i : idx) flat = flat * impl_->shape[axis++] + i;
  return impl_->data[static_cast<std::size_t>(flat)];
}

double Tensor::at(std::initializer_list<std::int64_t> idx) const {
  return const_cast<Tensor*>(this)->at(idx);
}

double Tensor::value() const {
  if (numel() != 1) {
    throw ContractError("value() requires a scalar tensor, got shape " +
                        shape_str(shape()));
  }
  return impl_->data[0];
}

bool Tensor::requires_grad() const {
  return impl_ && (impl_->requires_grad || impl_->node != nullptr);
}

Tensor& Tensor::set_requires_grad(bool on) {
  if (!impl_) throw ContractError("use of undefined tensor");
  impl_->requires_grad = on;
  return *this;
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) {
    throw ContractError("gradient not populated; run backward() first");
  }
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (!impl_) return;
  impl_->grad.assign(impl_->data.size(), 0.0);
}

std::span<double> Tensor::grad_accum() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

const std::shared_ptr<GradNode>& Tensor::node() const {
  static const std::shared_ptr<GradNode> none;
  return impl_ ? impl_->node : none;
}

void Tensor::set_node(std::shared_ptr<GradNode> node) {
  impl_->node = std::move(node);
}

void Tensor::backward() const {
  if (numel() != 1) {
    throw ContractError("backward() requires a scalar loss, got shape " +
                        shape_str(shape()));
  }
  if (!node()) {
    throw ContractError("backward() requires a backward graph on the loss");
  }

  // Iterative post-order DFS over tensors that carry nodes.
  std::vector<Tensor> order;
  std::unordered_set<const detail::TensorImpl*> visited;
  struct Frame {
    Tensor tensor;
    std::size_t next_input;
  };
  std::vector<Frame> stack;
  stack.push_back({*this, 0});
  visited.insert(impl_key());
  while (!stack.empty()) {
    Frame& top = stack.back();
    const auto& node = top.tensor.node();
    if (node && top.next_input < node->inputs.size()) {
      Tensor input = node->inputs[top.next_input++];
      if (input.node() && !visited.count(input.impl_key())) {
        visited.insert(input.impl_key());
        stack.push_back({std::move(input), 0});
      }
      continue;
    }
    order.push_back(top.tensor);
    stack.pop_back();
  }

  Tensor root = *this;
  root.grad_accum()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    it->node()->backward(*it);
  }
}

}  // namespace fliplog
