#pragma once

#include "fliplog/tensor.hpp"

namespace fliplog {

// Elementwise arithmetic (operand shapes must match exactly).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);
Tensor neg(const Tensor& a);

/// Natural logarithm; every element must be > 0.
Tensor log(const Tensor& a);
/// ln(1 + x); every element must be > -1.
Tensor log1p(const Tensor& a);
Tensor abs(const Tensor& a);

// Full reductions to a scalar tensor.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// Rank-2 matrix product [M,K] x [K,N] -> [M,N].
Tensor matmul(const Tensor& a, const Tensor& b);

/// Adds a row vector [F] to every row of [N,F].
Tensor add_rowvec(const Tensor& x, const Tensor& bias);

/// Adds a per-channel bias [C] to an NCHW tensor.
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);

/// Cross-correlation of NCHW input with an OIKK kernel. Output spatial extent
/// is floor((H + 2*padding - K) / stride) + 1 per axis.
Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride,
              int padding);

/// Adjoint of conv2d (gradient-of-conv semantics). Input is N,O,H,W and the
/// kernel keeps conv2d's OIKK layout, so channels map O -> I. Output spatial
/// extent is (H-1)*stride - 2*padding + K + output_padding; the
/// output_padding rows/columns receive no contributions.
Tensor conv2d_transpose(const Tensor& input, const Tensor& kernel, int stride,
                        int padding, int output_padding = 0);

Tensor relu(const Tensor& x);
/// Logistic sigmoid; outputs are strictly inside (0, 1).
Tensor sigmoid(const Tensor& x);

/// Same-data view with a new shape (element count must match).
Tensor reshape(const Tensor& x, Shape new_shape);

namespace detail {
/// C += A * B for row-major A [M,K], B [K,N], C [M,N].
void gemm_acc(std::int64_t m, std::int64_t k, std::int64_t n, const double* a,
              const double* b, double* c);
}  // namespace detail

}  // namespace fliplog
