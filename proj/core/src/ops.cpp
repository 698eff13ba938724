#include "fliplog/ops.hpp"

#include <cmath>
#include <memory>
#include <utility>

#include "fliplog/errors.hpp"

namespace fliplog {

namespace {

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

bool should_record(const Tensor& a) {
  return detail::grad_enabled() && a.requires_grad();
}

bool should_record(const Tensor& a, const Tensor& b) {
  return detail::grad_enabled() && (a.requires_grad() || b.requires_grad());
}

void attach(Tensor& out, const char* op, std::vector<Tensor> inputs,
            std::function<void(const Tensor&)> backward) {
  auto node = std::make_shared<GradNode>();
  node->op = op;
  node->inputs = std::move(inputs);
  node->backward = std::move(backward);
  out.set_node(std::move(node));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  Tensor out(a.shape());
  auto av = a.data();
  auto bv = b.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = av[i] + bv[i];
  if (should_record(a, b)) {
    attach(out, "add", {a, b}, [a, b](const Tensor& o) {
      auto go = o.grad();
      if (a.requires_grad()) {
        Tensor t = a;
        auto g = t.grad_accum();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i];
      }
      if (b.requires_grad()) {
        Tensor t = b;
        auto g = t.grad_accum();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i];
      }
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  Tensor out(a.shape());
  auto av = a.data();
  auto bv = b.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = av[i] - bv[i];
  if (should_record(a, b)) {
    attach(out, "sub", {a, b}, [a, b](const Tensor& o) {
      auto go = o.grad();
      if (a.requires_grad()) {
        Tensor t = a;
        auto g = t.grad_accum();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i];
      }
      if (b.requires_grad()) {
        Tensor t = b;
        auto g = t.grad_accum();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= go[i];
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  Tensor out(a.shape());
  auto av = a.data();
  auto bv = b.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = av[i] * bv[i];
  if (should_record(a, b)) {
    attach(out, "mul", {a, b}, [a, b](const Tensor& o) {
      auto go = o.grad();
      auto av = a.data();
      auto bv = b.data();
      if (a.requires_grad()) {
        Tensor t = a;
        auto g = t.grad_accum();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i] * bv[i];
      }
      if (b.requires_grad()) {
        Tensor t = b;
        auto g = t.grad_accum();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i] * av[i];
      }
    });
  }
  return out;
}

Tensor add_scalar(const Tensor& a, double c) {
  Tensor out(a.shape());
  auto av = a.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = av[i] + c;
  if (should_record(a)) {
    attach(out, "add_scalar", {a}, [a](const Tensor& o) {
      Tensor t = a;
      auto g = t.grad_accum();
      auto go = o.grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i];
    });
  }
  return out;
}

Tensor mul_scalar(const Tensor& a, double c) {
  Tensor out(a.shape());
  auto av = a.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = av[i] * c;
  if (should_record(a)) {
    attach(out, "mul_scalar", {a}, [a, c](const Tensor& o) {
      Tensor t = a;
      auto g = t.grad_accum();
      auto go = o.grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i] * c;
    });
  }
  return out;
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor log(const Tensor& a) {
  auto av = a.data();
  for (std::size_t i = 0; i < av.size(); ++i) {
    if (!(av[i] > 0.0)) {
      throw DomainError("log: element " + std::to_string(i) + " is " +
                        std::to_string(av[i]) + ", must be > 0");
    }
  }
  Tensor out(a.shape());
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::log(av[i]);
  if (should_record(a)) {
    attach(out, "log", {a}, [a](const Tensor& o) {
      Tensor t = a;
      auto g = t.grad_accum();
      auto go = o.grad();
      auto av = a.data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i] / av[i];
    });
  }
  return out;
}

Tensor log1p(const Tensor& a) {
  auto av = a.data();
  for (std::size_t i = 0; i < av.size(); ++i) {
    if (!(av[i] > -1.0)) {
      throw DomainError("log1p: element " + std::to_string(i) + " is " +
                        std::to_string(av[i]) + ", must be > -1");
    }
  }
  Tensor out(a.shape());
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::log1p(av[i]);
  if (should_record(a)) {
    attach(out, "log1p", {a}, [a](const Tensor& o) {
      Tensor t = a;
      auto g = t.grad_accum();
      auto go = o.grad();
      auto av = a.data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i] / (1.0 + av[i]);
    });
  }
  return out;
}

Tensor abs(const Tensor& a) {
  Tensor out(a.shape());
  auto av = a.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::fabs(av[i]);
  if (should_record(a)) {
    // Subgradient 0 at the kink.
    attach(out, "abs", {a}, [a](const Tensor& o) {
      Tensor t = a;
      auto g = t.grad_accum();
      auto go = o.grad();
      auto av = a.data();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double s = av[i] > 0.0 ? 1.0 : (av[i] < 0.0 ? -1.0 : 0.0);
        g[i] += go[i] * s;
      }
    });
  }
  return out;
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  Tensor out = Tensor::scalar(acc);
  if (should_record(a)) {
    attach(out, "sum", {a}, [a](const Tensor& o) {
      Tensor t = a;
      auto g = t.grad_accum();
      const double go = o.grad()[0];
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += go;
    });
  }
  return out;
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw ContractError("mean of empty tensor");
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  const double inv_n = 1.0 / static_cast<double>(a.numel());
  Tensor out = Tensor::scalar(acc * inv_n);
  if (should_record(a)) {
    attach(out, "mean", {a}, [a, inv_n](const Tensor& o) {
      Tensor t = a;
      auto g = t.grad_accum();
      const double go = o.grad()[0] * inv_n;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += go;
    });
  }
  return out;
}

namespace detail {

void gemm_acc(std::int64_t m, std::int64_t k, std::int64_t n, const double* a,
              const double* b, double* c) {
  for (std::int64_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::int64_t t = 0; t < k; ++t) {
      const double av = ai[t];
      const double* bt = b + t * n;
      for (std::int64_t j = 0; j < n; ++j) ci[j] += av * bt[j];
    }
  }
}

}  // namespace detail

namespace {

/// C[m,n] += sum_t A[m,t] * B[n,t]  (A times B-transpose).
void gemm_nt_acc(std::int64_t m, std::int64_t k, std::int64_t n,
                 const double* a, const double* b, double* c) {
  for (std::int64_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::int64_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double acc = 0.0;
      for (std::int64_t t = 0; t < k; ++t) acc += ai[t] * bj[t];
      ci[j] += acc;
    }
  }
}

/// C[m,n] += sum_t A[t,m] * B[t,n]  (A-transpose times B).
void gemm_tn_acc(std::int64_t k, std::int64_t m, std::int64_t n,
                 const double* a, const double* b, double* c) {
  for (std::int64_t t = 0; t < k; ++t) {
    const double* at = a + t * m;
    const double* bt = b + t * n;
    for (std::int64_t i = 0; i < m; ++i) {
      const double av = at[i];
      double* ci = c + i * n;
      for (std::int64_t j = 0; j < n; ++j) ci[j] += av * bt[j];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeError("matmul: expects rank-2 operands, got " +
                     shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::int64_t m = a.shape()[0];
  const std::int64_t k = a.shape()[1];
  const std::int64_t n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw ShapeError("matmul: inner extents differ, " + shape_str(a.shape()) +
                     " x " + shape_str(b.shape()));
  }
  Tensor out({m, n});
  detail::gemm_acc(m, k, n, a.data().data(), b.data().data(),
                   out.data().data());
  if (should_record(a, b)) {
    attach(out, "matmul", {a, b}, [a, b, m, k, n](const Tensor& o) {
      const double* go = o.grad().data();
      if (a.requires_grad()) {
        Tensor t = a;
        gemm_nt_acc(m, n, k, go, b.data().data(), t.grad_accum().data());
      }
      if (b.requires_grad()) {
        Tensor t = b;
        gemm_tn_acc(m, k, n, a.data().data(), go, t.grad_accum().data());
      }
    });
  }
  return out;
}

Tensor add_rowvec(const Tensor& x, const Tensor& bias) {
  if (x.rank() != 2 || bias.rank() != 1 || bias.shape()[0] != x.shape()[1]) {
    throw ShapeError("add_rowvec: need [N,F] + [F], got " +
                     shape_str(x.shape()) + " + " + shape_str(bias.shape()));
  }
  const std::int64_t rows = x.shape()[0];
  const std::int64_t cols = x.shape()[1];
  Tensor out(x.shape());
  auto xv = x.data();
  auto bv = bias.data();
  auto dst = out.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t c = 0; c < cols; ++c) {
      dst[r * cols + c] = xv[r * cols + c] + bv[c];
    }
  }
  if (should_record(x, bias)) {
    attach(out, "add_rowvec", {x, bias}, [x, bias, rows, cols](const Tensor& o) {
      auto go = o.grad();
      if (x.requires_grad()) {
        Tensor t = x;
        auto g = t.grad_accum();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i];
      }
      if (bias.requires_grad()) {
        Tensor t = bias;
        auto g = t.grad_accum();
        for (std::int64_t r = 0; r < rows; ++r) {
          for (std::int64_t c = 0; c < cols; ++c) g[c] += go[r * cols + c];
        }
      }
    });
  }
  return out;
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  if (x.rank() != 4 || bias.rank() != 1 || bias.shape()[0] != x.shape()[1]) {
    throw ShapeError("add_channel_bias: need NCHW + [C], got " +
                     shape_str(x.shape()) + " + " + shape_str(bias.shape()));
  }
  const std::int64_t batch = x.shape()[0];
  const std::int64_t channels = x.shape()[1];
  const std::int64_t plane = x.shape()[2] * x.shape()[3];
  Tensor out(x.shape());
  auto xv = x.data();
  auto bv = bias.data();
  auto dst = out.data();
  std::size_t i = 0;
  for (std::int64_t n = 0; n < batch; ++n) {
    for (std::int64_t c = 0; c < channels; ++c) {
      const double b = bv[c];
      for (std::int64_t p = 0; p < plane; ++p, ++i) dst[i] = xv[i] + b;
    }
  }
  if (should_record(x, bias)) {
    attach(out, "add_channel_bias", {x, bias},
           [x, bias, batch, channels, plane](const Tensor& o) {
             auto go = o.grad();
             if (x.requires_grad()) {
               Tensor t = x;
               auto g = t.grad_accum();
               for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i];
             }
             if (bias.requires_grad()) {
               Tensor t = bias;
               auto g = t.grad_accum();
               std::size_t i = 0;
               for (std::int64_t n = 0; n < batch; ++n) {
                 for (std::int64_t c = 0; c < channels; ++c) {
                   double acc = 0.0;
                   for (std::int64_t p = 0; p < plane; ++p, ++i) acc += go[i];
                   g[c] += acc;
                 }
               }
             }
           });
  }
  return out;
}

namespace {

struct ConvDims {
  std::int64_t batch, in_ch, in_h, in_w;
  std::int64_t out_ch, k;
  std::int64_t out_h, out_w;
};

/// Gathers kernel windows of `img` (ch x big_h x big_w) into a
/// (ch*k*k) x (small_h*small_w) column matrix; out-of-image taps are zero.
void im2col(const double* img, std::int64_t ch, std::int64_t big_h,
            std::int64_t big_w, std::int64_t k, std::int64_t stride,
            std::int64_t pad, std::int64_t small_h, std::int64_t small_w,
            double* col) {
  const std::int64_t cols = small_h * small_w;
  for (std::int64_t c = 0; c < ch; ++c) {
    for (std::int64_t kh = 0; kh < k; ++kh) {
      for (std::int64_t kw = 0; kw < k; ++kw) {
        double* row = col + ((c * k + kh) * k + kw) * cols;
        for (std::int64_t sh = 0; sh < small_h; ++sh) {
          const std::int64_t ih = sh * stride + kh - pad;
          if (ih < 0 || ih >= big_h) {
            for (std::int64_t sw = 0; sw < small_w; ++sw) row[sh * small_w + sw] = 0.0;
            continue;
          }
          const double* src = img + (c * big_h + ih) * big_w;
          for (std::int64_t sw = 0; sw < small_w; ++sw) {
            const std::int64_t iw = sw * stride + kw - pad;
            row[sh * small_w + sw] = (iw < 0 || iw >= big_w) ? 0.0 : src[iw];
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: scatter-adds column matrix entries back onto the dense
/// (ch x big_h x big_w) image.
void col2im_acc(const double* col, std::int64_t ch, std::int64_t big_h,
                std::int64_t big_w, std::int64_t k, std::int64_t stride,
                std::int64_t pad, std::int64_t small_h, std::int64_t small_w,
                double* img) {
  const std::int64_t cols = small_h * small_w;
  for (std::int64_t c = 0; c < ch; ++c) {
    for (std::int64_t kh = 0; kh < k; ++kh) {
      for (std::int64_t kw = 0; kw < k; ++kw) {
        const double* row = col + ((c * k + kh) * k + kw) * cols;
        for (std::int64_t sh = 0; sh < small_h; ++sh) {
          const std::int64_t ih = sh * stride + kh - pad;
          if (ih < 0 || ih >= big_h) continue;
          double* dst = img + (c * big_h + ih) * big_w;
          for (std::int64_t sw = 0; sw < small_w; ++sw) {
            const std::int64_t iw = sw * stride + kw - pad;
            if (iw >= 0 && iw < big_w) dst[iw] += row[sh * small_w + sw];
          }
        }
      }
    }
  }
}

ConvDims conv_dims(const char* op, const Tensor& input, const Tensor& kernel,
                   int stride, int padding) {
  if (input.rank() != 4 || kernel.rank() != 4) {
    throw ShapeError(std::string(op) + ": expects NCHW input and OIKK kernel, got " +
                     shape_str(input.shape()) + " and " + shape_str(kernel.shape()));
  }
  if (stride < 1) throw ShapeError(std::string(op) + ": stride must be >= 1");
  if (padding < 0) throw ShapeError(std::string(op) + ": padding must be >= 0");
  if (kernel.shape()[2] != kernel.shape()[3] || kernel.shape()[2] < 1) {
    throw ShapeError(std::string(op) + ": kernel must be square with K >= 1, got " +
                     shape_str(kernel.shape()));
  }
  ConvDims d{};
  d.batch = input.shape()[0];
  d.in_ch = input.shape()[1];
  d.in_h = input.shape()[2];
  d.in_w = input.shape()[3];
  d.out_ch = kernel.shape()[0];
  d.k = kernel.shape()[2];
  return d;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride,
              int padding) {
  ConvDims d = conv_dims("conv2d", input, kernel, stride, padding);
  if (kernel.shape()[1] != d.in_ch) {
    throw ShapeError("conv2d: input has " + std::to_string(d.in_ch) +
                     " channels but kernel expects " +
                     std::to_string(kernel.shape()[1]));
  }
  d.out_h = (d.in_h + 2 * padding - d.k) / stride + 1;
  d.out_w = (d.in_w + 2 * padding - d.k) / stride + 1;
  if (d.in_h + 2 * padding < d.k || d.in_w + 2 * padding < d.k || d.out_h < 1 ||
      d.out_w < 1) {
    throw ShapeError("conv2d: output extent < 1 for input " +
                     shape_str(input.shape()) + ", kernel " +
                     shape_str(kernel.shape()) + ", stride " +
                     std::to_string(stride) + ", padding " +
                     std::to_string(padding));
  }

  const std::int64_t ckk = d.in_ch * d.k * d.k;
  const std::int64_t cols = d.out_h * d.out_w;
  const std::int64_t in_plane = d.in_ch * d.in_h * d.in_w;
  const std::int64_t out_plane = d.out_ch * cols;

  Tensor out({d.batch, d.out_ch, d.out_h, d.out_w});
  const bool record = should_record(input, kernel);

  // Columns are kept for the backward pass; one scratch column otherwise.
  auto col_cache = std::make_shared<std::vector<double>>(
      static_cast<std::size_t>((record ? d.batch : 1) * ckk * cols));
  const double* kflat = kernel.data().data();
  for (std::int64_t n = 0; n < d.batch; ++n) {
    double* col = col_cache->data() + (record ? n : 0) * ckk * cols;
    im2col(input.data().data() + n * in_plane, d.in_ch, d.in_h, d.in_w, d.k,
           stride, padding, d.out_h, d.out_w, col);
    detail::gemm_acc(d.out_ch, ckk, cols, kflat, col,
                     out.data().data() + n * out_plane);
  }

  if (record) {
    attach(out, "conv2d", {input, kernel},
           [input, kernel, d, stride, padding, ckk, cols, in_plane, out_plane,
            col_cache](const Tensor& o) {
             const double* go = o.grad().data();
             std::vector<double> ktrans;
             if (input.requires_grad()) {
               // Pre-transpose kernel to [CKK, O] once.
               ktrans.assign(static_cast<std::size_t>(ckk * d.out_ch), 0.0);
               const double* kflat = kernel.data().data();
               for (std::int64_t oc = 0; oc < d.out_ch; ++oc)
                 for (std::int64_t r = 0; r < ckk; ++r)
                   ktrans[r * d.out_ch + oc] = kflat[oc * ckk + r];
             }
             std::vector<double> gcol(static_cast<std::size_t>(ckk * cols));
             for (std::int64_t n = 0; n < d.batch; ++n) {
               const double* col = col_cache->data() + n * ckk * cols;
               const double* gout = go + n * out_plane;
               if (kernel.requires_grad()) {
                 Tensor t = kernel;
                 gemm_nt_acc(d.out_ch, cols, ckk, gout, col,
                             t.grad_accum().data());
               }
               if (input.requires_grad()) {
                 Tensor t = input;
                 std::fill(gcol.begin(), gcol.end(), 0.0);
                 detail::gemm_acc(ckk, d.out_ch, cols, ktrans.data(), gout,
                                  gcol.data());
                 col2im_acc(gcol.data(), d.in_ch, d.in_h, d.in_w, d.k, stride,
                            padding, d.out_h, d.out_w,
                            t.grad_accum().data() + n * in_plane);
               }
             }
           });
  }
  return out;
}

Tensor conv2d_transpose(const Tensor& input, const Tensor& kernel, int stride,
                        int padding, int output_padding) {
  ConvDims d = conv_dims("conv2d_transpose", input, kernel, stride, padding);
  if (output_padding < 0 || output_padding >= stride) {
    throw ShapeError("conv2d_transpose: output_padding must be in [0, stride)");
  }
  if (kernel.shape()[0] != d.in_ch) {
    throw ShapeError("conv2d_transpose: input has " + std::to_string(d.in_ch) +
                     " channels but kernel expects " +
                     std::to_string(kernel.shape()[0]));
  }
  const std::int64_t dec_ch = kernel.shape()[1];
  d.out_h = (d.in_h - 1) * stride - 2 * padding + d.k + output_padding;
  d.out_w = (d.in_w - 1) * stride - 2 * padding + d.k + output_padding;
  if (d.out_h < 1 || d.out_w < 1) {
    throw ShapeError("conv2d_transpose: output extent < 1 for input " +
                     shape_str(input.shape()) + ", kernel " +
                     shape_str(kernel.shape()));
  }

  const std::int64_t ikk = dec_ch * d.k * d.k;
  const std::int64_t cols = d.in_h * d.in_w;  // columns live on the small grid
  const std::int64_t in_plane = d.in_ch * cols;
  const std::int64_t out_plane = dec_ch * d.out_h * d.out_w;

  Tensor out({d.batch, dec_ch, d.out_h, d.out_w});
  std::vector<double> col(static_cast<std::size_t>(ikk * cols));
  const double* kflat = kernel.data().data();
  for (std::int64_t n = 0; n < d.batch; ++n) {
    std::fill(col.begin(), col.end(), 0.0);
    gemm_tn_acc(d.in_ch, ikk, cols, kflat, input.data().data() + n * in_plane,
                col.data());
    col2im_acc(col.data(), dec_ch, d.out_h, d.out_w, d.k, stride, padding,
               d.in_h, d.in_w, out.data().data() + n * out_plane);
  }

  if (should_record(input, kernel)) {
    const std::int64_t out_h = d.out_h;
    const std::int64_t out_w = d.out_w;
    attach(out, "conv2d_transpose", {input, kernel},
           [input, kernel, d, dec_ch, stride, padding, ikk, cols, in_plane,
            out_plane, out_h, out_w](const Tensor& o) {
             const double* go = o.grad().data();
             std::vector<double> gcol(static_cast<std::size_t>(ikk * cols));
             for (std::int64_t n = 0; n < d.batch; ++n) {
               im2col(go + n * out_plane, dec_ch, out_h, out_w, d.k, stride,
                      padding, d.in_h, d.in_w, gcol.data());
               if (input.requires_grad()) {
                 Tensor t = input;
                 detail::gemm_acc(d.in_ch, ikk, cols, kernel.data().data(),
                                  gcol.data(),
                                  t.grad_accum().data() + n * in_plane);
               }
               if (kernel.requires_grad()) {
                 Tensor t = kernel;
                 gemm_nt_acc(d.in_ch, cols, ikk,
                             input.data().data() + n * in_plane, gcol.data(),
                             t.grad_accum().data());
               }
             }
           });
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape());
  auto xv = x.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  if (should_record(x)) {
    attach(out, "relu", {x}, [x](const Tensor& o) {
      Tensor t = x;
      auto g = t.grad_accum();
      auto go = o.grad();
      auto xv = x.data();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (xv[i] > 0.0) g[i] += go[i];
      }
    });
  }
  return out;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out(x.shape());
  auto xv = x.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    // Split by sign so exp never overflows.
    const double v = xv[i];
    if (v >= 0.0) {
      dst[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      dst[i] = e / (1.0 + e);
    }
  }
  if (should_record(x)) {
    attach(out, "sigmoid", {x}, [x](const Tensor& o) {
      Tensor t = x;
      auto g = t.grad_accum();
      auto go = o.grad();
      auto ov = o.data();
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += go[i] * ov[i] * (1.0 - ov[i]);
      }
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, Shape new_shape) {
  if (shape_numel(new_shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                     shape_str(new_shape));
  }
  Tensor out(std::move(new_shape),
             std::vector<double>(x.data().begin(), x.data().end()));
  if (should_record(x)) {
    attach(out, "reshape", {x}, [x](const Tensor& o) {
      Tensor t = x;
      auto g = t.grad_accum();
      auto go = o.grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i];
    });
  }
  return out;
}

}  // namespace fliplog
