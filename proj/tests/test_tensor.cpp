#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "fliplog/errors.hpp"
#include "fliplog/ops.hpp"
#include "fliplog/optim.hpp"
#include "fliplog/rng.hpp"
#include "fliplog/tensor.hpp"
#include "testutil.hpp"

using namespace fliplog;
using testutil::clone;
using testutil::random_tensor;
using testutil::rel_err;

TEST_CASE("matmul: identity, hand product, zeros") {
  Tensor eye({2, 2}, {1, 0, 0, 1});
  Tensor m({2, 2}, {1, 2, 3, 4});
  Tensor prod = matmul(eye, m);
  CHECK(prod.data()[0] == 1);
  CHECK(prod.data()[1] == 2);
  CHECK(prod.data()[2] == 3);
  CHECK(prod.data()[3] == 4);

  Tensor row({1, 2}, {1, 2});
  Tensor col({2, 1}, {3, 4});
  CHECK(matmul(row, col).value() == 11);

  Tensor z = matmul(Tensor::zeros({2, 3}), Tensor::zeros({3, 5}));
  for (double v : z.data()) CHECK(v == 0);

  CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})),
                  ShapeError);
  CHECK_THROWS_AS(matmul(Tensor::zeros({2}), Tensor::zeros({2, 2})), ShapeError);
}

TEST_CASE("conv2d: identity kernel, hand sum, zero input") {
  Xoshiro256ss rng(11);
  Tensor x = random_tensor(rng, {2, 3, 5, 5}, -2.0, 2.0);
  Tensor unit({3, 3, 1, 1});
  // 1x1 kernel mapping each channel to itself.
  for (int c = 0; c < 3; ++c) unit.at({c, c, 0, 0}) = 1.0;
  Tensor out = conv2d(x, unit, 1, 0);
  REQUIRE(out.shape() == x.shape());
  for (std::size_t i = 0; i < out.data().size(); ++i) {
    CHECK(out.data()[i] == x.data()[i]);
  }

  Tensor img({1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor ones = Tensor::full({1, 1, 2, 2}, 1.0);
  Tensor summed = conv2d(img, ones, 1, 0);
  REQUIRE(summed.shape() == Shape{1, 1, 1, 1});
  CHECK(summed.value() == 10.0);

  Tensor zeros = conv2d(Tensor::zeros({1, 2, 6, 6}),
                        random_tensor(rng, {4, 2, 3, 3}, -1.0, 1.0), 2, 1);
  for (double v : zeros.data()) CHECK(v == 0.0);

  CHECK_THROWS_AS(conv2d(Tensor::zeros({1, 2, 6, 6}),
                         Tensor::zeros({4, 3, 3, 3}), 1, 0),
                  ShapeError);  // channel mismatch
  CHECK_THROWS_AS(conv2d(Tensor::zeros({1, 1, 2, 2}),
                         Tensor::zeros({1, 1, 5, 5}), 1, 0),
                  ShapeError);  // output extent < 1
}

TEST_CASE("conv2d output extent follows floor((H + 2p - K)/s) + 1") {
  Xoshiro256ss rng(12);
  for (int h : {7, 8, 13}) {
    for (int k : {1, 3, 5}) {
      for (int s : {1, 2, 3}) {
        for (int p : {0, 1, 2}) {
          if (h + 2 * p < k) continue;
          Tensor x = random_tensor(rng, {1, 2, h, h}, -1.0, 1.0);
          Tensor ker = random_tensor(rng, {3, 2, k, k}, -1.0, 1.0);
          Tensor out = conv2d(x, ker, s, p);
          const std::int64_t expect = (h + 2 * p - k) / s + 1;
          CHECK(out.shape()[2] == expect);
          CHECK(out.shape()[3] == expect);
        }
      }
    }
  }
}

TEST_CASE("conv2d_transpose: unit kernel identity and zero input") {
  Xoshiro256ss rng(13);
  Tensor x = random_tensor(rng, {2, 3, 4, 4}, -2.0, 2.0);
  Tensor unit({3, 3, 1, 1});
  for (int c = 0; c < 3; ++c) unit.at({c, c, 0, 0}) = 1.0;
  Tensor out = conv2d_transpose(x, unit, 1, 0);
  REQUIRE(out.shape() == x.shape());
  for (std::size_t i = 0; i < out.data().size(); ++i) {
    CHECK(out.data()[i] == x.data()[i]);
  }

  Tensor z = conv2d_transpose(Tensor::zeros({1, 4, 4, 4}),
                              random_tensor(rng, {4, 2, 3, 3}, -1.0, 1.0), 2, 1,
                              1);
  CHECK(z.shape() == Shape{1, 2, 8, 8});
  for (double v : z.data()) CHECK(v == 0.0);
}

namespace {

/// Dense adjoint oracle: materializes conv2d as a matrix by probing basis
/// images, then applies its transpose.
Tensor adjoint_of_conv(const Tensor& y, const Tensor& kernel, int stride,
                       int padding, const Shape& x_shape) {
  Tensor out(x_shape);
  const std::int64_t n = shape_numel(x_shape);
  for (std::int64_t i = 0; i < n; ++i) {
    Tensor basis = Tensor::zeros(x_shape);
    basis.data()[i] = 1.0;
    Tensor col = conv2d(basis, kernel, stride, padding);
    out.data()[i] = testutil::dot(col, y);
  }
  return out;
}

}  // namespace

TEST_CASE("conv2d_transpose equals the brute-force adjoint of conv2d") {
  Xoshiro256ss rng(14);
  // Includes the 2x2 input / 3x3 kernel / stride 2 / padding 1 case.
  struct Case { int h, k, s, p, in_ch, out_ch; };
  for (const Case& c : {Case{2, 3, 2, 1, 1, 1}, Case{5, 3, 2, 1, 2, 3},
                        Case{6, 3, 1, 1, 1, 2}, Case{7, 5, 3, 2, 2, 1}}) {
    Tensor kernel = random_tensor(rng, {c.out_ch, c.in_ch, c.k, c.k}, -1, 1);
    const Shape x_shape{2, c.in_ch, c.h, c.h};
    const std::int64_t out_h = (c.h + 2 * c.p - c.k) / c.s + 1;
    Tensor y = random_tensor(rng, {2, c.out_ch, out_h, out_h}, -1, 1);
    const int opad = static_cast<int>(c.h - ((out_h - 1) * c.s - 2 * c.p + c.k));
    Tensor via_op = conv2d_transpose(y, kernel, c.s, c.p, opad);
    Tensor via_oracle = adjoint_of_conv(y, kernel, c.s, c.p, x_shape);
    REQUIRE(via_op.shape() == via_oracle.shape());
    for (std::size_t i = 0; i < via_op.data().size(); ++i) {
      CHECK(via_op.data()[i] == doctest::Approx(via_oracle.data()[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("adjoint identity <conv(x), y> == <x, convT(y)> within 1e-9 relative") {
  Xoshiro256ss rng(15);
  for (int trial = 0; trial < 25; ++trial) {
    const int h = 4 + static_cast<int>(rng.below(8));
    const int k = 1 + 2 * static_cast<int>(rng.below(3));
    const int s = 1 + static_cast<int>(rng.below(3));
    const int p = static_cast<int>(rng.below(static_cast<std::uint64_t>(k / 2 + 1)));
    if (h + 2 * p < k) continue;
    const int in_ch = 1 + static_cast<int>(rng.below(3));
    const int out_ch = 1 + static_cast<int>(rng.below(3));
    Tensor x = random_tensor(rng, {2, in_ch, h, h}, -2, 2);
    Tensor kernel = random_tensor(rng, {out_ch, in_ch, k, k}, -2, 2);
    Tensor cx = conv2d(x, kernel, s, p);
    Tensor y = random_tensor(rng, cx.shape(), -2, 2);
    const int out_h = static_cast<int>(cx.shape()[2]);
    const int opad = h - ((out_h - 1) * s - 2 * p + k);
    Tensor ty = conv2d_transpose(y, kernel, s, p, opad);
    const double lhs = testutil::dot(cx, y);
    const double rhs = testutil::dot(x, ty);
    CHECK(rel_err(lhs, rhs) < 1e-9 * std::max({1.0, std::fabs(lhs)}));
    CHECK(std::fabs(lhs - rhs) <=
          1e-9 * std::max({1.0, std::fabs(lhs), std::fabs(rhs)}));
  }
}

TEST_CASE("activations: sigmoid symmetry, relu definition, sigmoid(ln 3)") {
  Tensor x({3}, {0.0, -3.0, 3.0});
  Tensor s = sigmoid(x);
  CHECK(s.data()[0] == 0.5);
  Tensor r = relu(x);
  CHECK(r.data()[1] == 0.0);
  CHECK(r.data()[2] == 3.0);

  Tensor ln3 = Tensor::scalar(std::log(3.0));
  CHECK(sigmoid(ln3).value() == doctest::Approx(0.75).epsilon(1e-15));

  // Strictly inside (0,1) even for huge logits.
  Tensor extreme({2}, {-1000.0, 1000.0});
  Tensor se = sigmoid(extreme);
  CHECK(se.data()[0] > 0.0);
  CHECK(se.data()[1] < 1.0);
}

TEST_CASE("backward: zero at minimum, w^2 chain, accumulation semantics") {
  Tensor y({3}, {0.2, 0.5, 0.9});
  Tensor pred = clone(y, /*requires_grad=*/true);
  Tensor d = sub(y, pred);
  Tensor loss = mean(mul(d, d));
  loss.backward();
  for (double g : pred.grad()) CHECK(g == 0.0);

  Tensor w = Tensor::scalar(3.0, /*requires_grad=*/true);
  Tensor f = mul(w, w);
  f.backward();
  CHECK(w.grad()[0] == 6.0);

  // Repeated backward without reset accumulates.
  Tensor w2 = Tensor::scalar(3.0, true);
  Tensor f2 = mul(w2, w2);
  f2.backward();
  f2.backward();
  CHECK(w2.grad()[0] == 12.0);
  w2.zero_grad();
  f2.backward();
  CHECK(w2.grad()[0] == 6.0);

  CHECK_THROWS_AS(Tensor({2}, {1.0, 2.0}, true).backward(), ContractError);
  Tensor vec({2}, {1.0, 2.0}, true);
  Tensor nonscalar = mul(vec, vec);
  CHECK_THROWS_AS(nonscalar.backward(), ContractError);
}

TEST_CASE("backward through shared subexpressions sums both paths") {
  // f = u*u + u with u = 2w  =>  df/dw = 2*(2u + 1) = 2*(4w + 1)
  Tensor w = Tensor::scalar(1.5, true);
  Tensor u = mul_scalar(w, 2.0);
  Tensor f = add(mul(u, u), u);
  sum(f).backward();
  CHECK(w.grad()[0] == doctest::Approx(2.0 * (4.0 * 1.5 + 1.0)).epsilon(1e-15));
}

TEST_CASE("every differentiable op matches central finite differences") {
  // 100 random small tensors spread over the op set, entries in [-2, 2]
  // (shifted positive for log, nudged away from kinks for abs/relu).
  Xoshiro256ss rng(16);
  const double h = 1e-5;
  const double tol = 1e-4;
  int tensors_checked = 0;

  auto check_unary = [&](auto make_loss, double lo, double hi, double kink) {
    for (int i = 0; i < 10; ++i) {
      Shape shape{1 + static_cast<std::int64_t>(rng.below(3)),
                  1 + static_cast<std::int64_t>(rng.below(4))};
      Tensor x = random_tensor(rng, shape, lo, hi, true);
      if (kink > 0.0) {
        for (double& v : x.data()) {
          if (std::fabs(v) < kink) v = v < 0 ? v - kink : v + kink;
        }
      }
      Tensor loss = make_loss(x);
      loss.backward();
      auto numeric = testutil::numeric_gradient(
          [&](const Tensor& probe) {
            NoGradGuard ng;
            return make_loss(probe).value();
          },
          x, h);
      auto analytic = x.grad();
      for (std::size_t j = 0; j < numeric.size(); ++j) {
        CHECK(rel_err(analytic[j], numeric[j]) < tol);
      }
      ++tensors_checked;
    }
  };

  check_unary([](const Tensor& x) { return mean(mul(x, x)); }, -2, 2, 0);
  check_unary([](const Tensor& x) { return sum(log(x)); }, 0.1, 2, 0);
  check_unary([](const Tensor& x) { return sum(log1p(x)); }, -0.5, 2, 0);
  check_unary([](const Tensor& x) { return sum(abs(x)); }, -2, 2, 0.01);
  check_unary([](const Tensor& x) { return sum(relu(x)); }, -2, 2, 0.01);
  check_unary([](const Tensor& x) { return sum(sigmoid(x)); }, -2, 2, 0);
  check_unary([](const Tensor& x) { return mean(add_scalar(mul_scalar(x, 3.0), 1.0)); },
              -2, 2, 0);
  check_unary([](const Tensor& x) { return sum(mul(sigmoid(x), x)); }, -2, 2, 0);

  // Binary and structural ops.
  for (int i = 0; i < 5; ++i) {
    Tensor a = random_tensor(rng, {3, 4}, -2, 2, true);
    Tensor b = random_tensor(rng, {4, 2}, -2, 2, true);
    Tensor loss = mean(mul(matmul(a, b), matmul(a, b)));
    loss.backward();
    auto eval = [&](const Tensor& aa, const Tensor& bb) {
      NoGradGuard ng;
      Tensor m = matmul(aa, bb);
      return mean(mul(m, m)).value();
    };
    auto na = testutil::numeric_gradient(
        [&](const Tensor& p) { return eval(p, b); }, a, h);
    auto nb = testutil::numeric_gradient(
        [&](const Tensor& p) { return eval(a, p); }, b, h);
    for (std::size_t j = 0; j < na.size(); ++j) CHECK(rel_err(a.grad()[j], na[j]) < tol);
    for (std::size_t j = 0; j < nb.size(); ++j) CHECK(rel_err(b.grad()[j], nb[j]) < tol);
    tensors_checked += 2;
  }

  for (int i = 0; i < 5; ++i) {
    Tensor x = random_tensor(rng, {2, 2, 5, 5}, -2, 2, true);
    Tensor k = random_tensor(rng, {3, 2, 3, 3}, -2, 2, true);
    Tensor b = random_tensor(rng, {3}, -1, 1, true);
    auto loss_of = [&](const Tensor& xx, const Tensor& kk, const Tensor& bb) {
      Tensor c = add_channel_bias(conv2d(xx, kk, 2, 1), bb);
      return mean(mul(c, c));
    };
    Tensor loss = loss_of(x, k, b);
    loss.backward();
    auto nx = testutil::numeric_gradient(
        [&](const Tensor& p) { NoGradGuard ng; return loss_of(p, k, b).value(); }, x, h);
    auto nk = testutil::numeric_gradient(
        [&](const Tensor& p) { NoGradGuard ng; return loss_of(x, p, b).value(); }, k, h);
    auto nb = testutil::numeric_gradient(
        [&](const Tensor& p) { NoGradGuard ng; return loss_of(x, k, p).value(); }, b, h);
    for (std::size_t j = 0; j < nx.size(); ++j) CHECK(rel_err(x.grad()[j], nx[j]) < tol);
    for (std::size_t j = 0; j < nk.size(); ++j) CHECK(rel_err(k.grad()[j], nk[j]) < tol);
    for (std::size_t j = 0; j < nb.size(); ++j) CHECK(rel_err(b.grad()[j], nb[j]) < tol);
    tensors_checked += 3;
  }

  for (int i = 0; i < 5; ++i) {
    Tensor x = random_tensor(rng, {2, 3, 4, 4}, -2, 2, true);
    Tensor k = random_tensor(rng, {3, 2, 3, 3}, -2, 2, true);
    auto loss_of = [&](const Tensor& xx, const Tensor& kk) {
      Tensor c = conv2d_transpose(xx, kk, 2, 1, 1);
      return mean(mul(c, c));
    };
    Tensor loss = loss_of(x, k);
    loss.backward();
    auto nx = testutil::numeric_gradient(
        [&](const Tensor& p) { NoGradGuard ng; return loss_of(p, k).value(); }, x, h);
    auto nk = testutil::numeric_gradient(
        [&](const Tensor& p) { NoGradGuard ng; return loss_of(x, p).value(); }, k, h);
    for (std::size_t j = 0; j < nx.size(); ++j) CHECK(rel_err(x.grad()[j], nx[j]) < tol);
    for (std::size_t j = 0; j < nk.size(); ++j) CHECK(rel_err(k.grad()[j], nk[j]) < tol);
    tensors_checked += 2;
  }

  for (int i = 0; i < 5; ++i) {
    Tensor x = random_tensor(rng, {4, 6}, -2, 2, true);
    Tensor b = random_tensor(rng, {6}, -1, 1, true);
    auto loss_of = [&](const Tensor& xx, const Tensor& bb) {
      Tensor r = reshape(add_rowvec(xx, bb), {2, 12});
      return mean(mul(r, r));
    };
    loss_of(x, b).backward();
    auto nx = testutil::numeric_gradient(
        [&](const Tensor& p) { NoGradGuard ng; return loss_of(p, b).value(); }, x, h);
    auto nb = testutil::numeric_gradient(
        [&](const Tensor& p) { NoGradGuard ng; return loss_of(x, p).value(); }, b, h);
    for (std::size_t j = 0; j < nx.size(); ++j) CHECK(rel_err(x.grad()[j], nx[j]) < tol);
    for (std::size_t j = 0; j < nb.size(); ++j) CHECK(rel_err(b.grad()[j], nb[j]) < tol);
    tensors_checked += 2;
  }

  CHECK(tensors_checked >= 100);
}

TEST_CASE("optimizer: SGD follows the update rule exactly") {
  std::vector<Tensor> params{Tensor::scalar(1.0, true)};
  params[0].zero_grad();
  const_cast<double&>(params[0].grad()[0]) = 2.0;
  {
    // populate grad via backward instead of poking internals
    params[0] = Tensor::scalar(1.0, true);
    Tensor loss = mul_scalar(params[0], 2.0);  // d/dw = 2
    loss.backward();
  }
  Optimizer sgd(OptimizerKind::Sgd, 0.1);
  std::vector<Tensor> ps{params[0]};
  sgd.step(ps);
  CHECK(ps[0].data()[0] == 0.8);
  CHECK(sgd.step_count() == 1);
  CHECK_FALSE(sgd.has_moments());

  // Zero gradient leaves the parameter untouched.
  Tensor w = Tensor::scalar(0.375, true);
  w.zero_grad();
  std::vector<Tensor> ws{w};
  Optimizer sgd2(OptimizerKind::Sgd, 0.5);
  sgd2.step(ws);
  CHECK(ws[0].data()[0] == 0.375);

  // Update equals theta - lr*grad as written, for random values.
  Xoshiro256ss rng(17);
  for (int i = 0; i < 50; ++i) {
    const double theta = rng.uniform(-5, 5);
    const double g = rng.uniform(-3, 3);
    const double lr = rng.uniform(1e-4, 1.0);
    Tensor p = Tensor::scalar(theta, true);
    Tensor loss = mul_scalar(p, g);
    loss.backward();
    std::vector<Tensor> one{p};
    Optimizer opt(OptimizerKind::Sgd, lr);
    opt.step(one);
    CHECK(one[0].data()[0] == theta - lr * g);
  }

  // Missing gradient is a contract violation.
  std::vector<Tensor> missing{Tensor::scalar(1.0, true)};
  Optimizer sgd3(OptimizerKind::Sgd, 0.1);
  CHECK_THROWS_AS(sgd3.step(missing), ContractError);
}

TEST_CASE("optimizer: Adam first step has magnitude ~ lr") {
  for (double g : {0.5, -2.0, 1e-3}) {
    Tensor p = Tensor::scalar(1.0, true);
    Tensor loss = mul_scalar(p, g);
    loss.backward();
    std::vector<Tensor> ps{p};
    Optimizer adam(OptimizerKind::Adam, 1e-3);
    adam.step(ps);
    CHECK(adam.has_moments());
    const double update = ps[0].data()[0] - 1.0;
    // Bias-corrected first step: -lr * g / (|g| + eps).
    CHECK(std::fabs(update) == doctest::Approx(1e-3).epsilon(1e-4));
    CHECK(update * g < 0.0);  // moves against the gradient
  }
}

TEST_CASE("determinism: identical seeds give bitwise-identical parameters") {
  auto run = [](std::uint64_t seed) {
    Xoshiro256ss rng(seed);
    Tensor w = random_tensor(rng, {4, 4}, -1, 1, true);
    Tensor x = random_tensor(rng, {4, 4}, -1, 1);
    Optimizer opt(OptimizerKind::Sgd, 0.05);
    std::vector<Tensor> params{w};
    for (int step = 0; step < 7; ++step) {
      w.zero_grad();
      Tensor d = sub(matmul(x, w), x);
      mean(mul(d, d)).backward();
      opt.step(params);
    }
    return std::vector<double>(w.data().begin(), w.data().end());
  };
  auto a = run(99);
  auto b = run(99);
  REQUIRE(a.size() == b.size());
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
  auto c = run(100);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i) any_diff |= a[i] != c[i];
  CHECK(any_diff);
}

TEST_CASE("xoshiro256** stream is stable and shuffle is library-independent") {
  // First outputs for seed 42 via the splitmix64 expansion; frozen so a
  // refactor cannot silently change every seeded experiment.
  Xoshiro256ss rng(42);
  const std::uint64_t expect[4] = {8294279254808953419ULL,
                                   12015467408321317882ULL,
                                   6367295526588527354ULL,
                                   3795112544855205577ULL};
  for (std::uint64_t e : expect) CHECK(rng() == e);

  std::vector<int> items{0, 1, 2, 3, 4, 5, 6, 7};
  Xoshiro256ss rng2(7);
  fliplog::shuffle(items, rng2);
  std::vector<int> again{0, 1, 2, 3, 4, 5, 6, 7};
  Xoshiro256ss rng3(7);
  fliplog::shuffle(again, rng3);
  CHECK(items == again);
}
