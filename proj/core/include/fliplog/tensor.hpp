#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fliplog {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor;

/// Backward-graph record attached to an op output. `backward` reads the
/// output gradient and accumulates into the gradients of `inputs`. The graph
/// is acyclic by construction: an op output is a fresh tensor and inputs are
/// never re-pointed afterwards.
struct GradNode {
  const char* op = "";
  std::vector<Tensor> inputs;
  std::function<void(const Tensor& out)> backward;
};

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  std::shared_ptr<GradNode> node;
  bool requires_grad = false;
};

/// Thread-local switch consulted by every differentiable op; when false no
/// GradNode is recorded. Toggled via NoGradGuard.
bool grad_enabled();

}  // namespace detail

/// Dense row-major tensor of 64-bit floats with an optional gradient buffer
/// and reverse-mode graph record. Copies are shallow (shared storage); data
/// is treated as immutable once an op has consumed the tensor, only grad
/// buffers and leaf parameters (via optimizer updates) mutate.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::int64_t numel() const;
  int rank() const { return static_cast<int>(shape().size()); }

  std::span<double> data();
  std::span<const double> data() const;

  /// Element access by multi-index; row-major, bounds unchecked.
  double& at(std::initializer_list<std::int64_t> idx);
  double at(std::initializer_list<std::int64_t> idx) const;

  /// Value of a scalar (1-element) tensor.
  double value() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);

  bool has_grad() const;
  std::span<const double> grad() const;
  /// Zero-fills the gradient buffer (allocating it if absent).
  void zero_grad();

  /// Reverse-mode sweep from a scalar root. Gradients accumulate into any
  /// existing buffers; call zero_grad on parameters between steps.
  void backward() const;

  const std::shared_ptr<GradNode>& node() const;

  // Op-construction internals.
  void set_node(std::shared_ptr<GradNode> node);
  /// Accumulating gradient buffer, allocated zero-filled on first use.
  std::span<double> grad_accum();

  bool same_impl(const Tensor& other) const { return impl_ == other.impl_; }
  const detail::TensorImpl* impl_key() const { return impl_.get(); }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

/// RAII guard disabling graph recording on the current thread (evaluation
/// passes, score computation).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace fliplog
