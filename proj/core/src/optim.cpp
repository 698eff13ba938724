#include "fliplog/optim.hpp"

#include <cmath>

#include "fliplog/errors.hpp"

namespace fliplog {

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::Sgd ? "sgd" : "adam";
}

OptimizerKind optimizer_kind_from_string(const std::string& name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "adam") return OptimizerKind::Adam;
  throw ContractError("unknown optimizer '" + name + "'");
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate, double beta1,
                     double beta2, double epsilon)
    : kind_(kind), lr_(learning_rate), beta1_(beta1), beta2_(beta2),
      epsilon_(epsilon) {
  if (!(lr_ > 0.0)) throw ContractError("learning rate must be positive");
}

void Optimizer::step(std::vector<Tensor>& params) {
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!params[p].has_grad()) {
      throw ContractError("optimizer step: parameter " + std::to_string(p) +
                          " has no gradient");
    }
  }
  if (kind_ == OptimizerKind::Adam && m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t p = 0; p < params.size(); ++p) {
      m_[p].assign(static_cast<std::size_t>(params[p].numel()), 0.0);
      v_[p].assign(static_cast<std::size_t>(params[p].numel()), 0.0);
    }
  }
  t_ += 1;

  if (kind_ == OptimizerKind::Sgd) {
    for (auto& param : params) {
      auto theta = param.data();
      auto grad = param.grad();
      for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lr_ * grad[i];
    }
    return;
  }

  const double m_corr = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double v_corr = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto theta = params[p].data();
    auto grad = params[p].grad();
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = grad[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double m_hat = m[i] / m_corr;
      const double v_hat = v[i] / v_corr;
      theta[i] -= lr_ * m_hat / (std::sqrt(v_hat) + epsilon_);
    }
  }
}

}  // namespace fliplog
