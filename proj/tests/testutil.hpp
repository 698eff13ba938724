#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fliplog/rng.hpp"
#include "fliplog/tensor.hpp"

namespace testutil {

inline fliplog::Tensor random_tensor(fliplog::Xoshiro256ss& rng,
                                     fliplog::Shape shape, double lo,
                                     double hi, bool requires_grad = false) {
  fliplog::Tensor t(std::move(shape), requires_grad);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

/// |a - b| / max(1, |a|, |b|) as used by the gradient checks.
inline double rel_err(double a, double b) {
  return std::fabs(a - b) /
         std::max({1.0, std::fabs(a), std::fabs(b)});
}

/// Central-difference gradient of a scalar-valued function with respect to
/// one input tensor, evaluated coordinate by coordinate.
inline std::vector<double> numeric_gradient(
    const std::function<double(const fliplog::Tensor&)>& f,
    const fliplog::Tensor& x, double h = 1e-5) {
  std::vector<double> grad(static_cast<std::size_t>(x.numel()));
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    fliplog::Tensor plus(x.shape(),
                         std::vector<double>(x.data().begin(), x.data().end()));
    fliplog::Tensor minus(x.shape(),
                          std::vector<double>(x.data().begin(), x.data().end()));
    plus.data()[i] += h;
    minus.data()[i] -= h;
    grad[static_cast<std::size_t>(i)] = (f(plus) - f(minus)) / (2.0 * h);
  }
  return grad;
}

inline fliplog::Tensor clone(const fliplog::Tensor& t, bool requires_grad) {
  return fliplog::Tensor(t.shape(),
                         std::vector<double>(t.data().begin(), t.data().end()),
                         requires_grad);
}

inline double dot(const fliplog::Tensor& a, const fliplog::Tensor& b) {
  double acc = 0.0;
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
  return acc;
}

/// Directory configured at build time for the bundled dataset files.
inline std::string data_dir() { return FLIPLOG_DATA_DIR; }

}  // namespace testutil
