#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fliplog/tensor.hpp"

namespace fliplog {

enum class OptimizerKind { Sgd, Adam };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& name);

/// Gradient-descent parameter updater. SGD applies theta -= lr * grad
/// exactly; Adam applies the standard bias-corrected moment update. Moment
/// buffers exist only for Adam and are sized to the parameter list on the
/// first step.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, double beta1 = 0.9,
            double beta2 = 0.999, double epsilon = 1e-8);

  /// Applies one update to every parameter in place using its populated
  /// gradient buffer. Throws ContractError when a gradient is missing.
  void step(std::vector<Tensor>& params);

  OptimizerKind kind() const { return kind_; }
  double learning_rate() const { return lr_; }
  std::int64_t step_count() const { return t_; }
  bool has_moments() const { return !m_.empty(); }

 private:
  OptimizerKind kind_;
  double lr_;
  double beta1_;
  double beta2_;
  double epsilon_;
  std::int64_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace fliplog
