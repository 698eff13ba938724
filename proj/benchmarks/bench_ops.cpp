#include <benchmark/benchmark.h>

#include "fliplog/losses.hpp"
#include "fliplog/metrics.hpp"
#include "fliplog/model.hpp"
#include "fliplog/ops.hpp"
#include "fliplog/optim.hpp"
#include "fliplog/rng.hpp"

namespace {

using namespace fliplog;

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0,
                     double hi = 1.0, bool requires_grad = false) {
  Xoshiro256ss rng(seed);
  Tensor t(std::move(shape), requires_grad);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const std::int64_t n = state.range(0);
  Tensor a = random_tensor({n, n}, 1);
  Tensor b = random_tensor({n, n}, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(matmul(a, b).data().data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256);

void BM_Conv2dForward(benchmark::State& state) {
  const std::int64_t batch = state.range(0);
  Tensor x = random_tensor({batch, 16, 14, 14}, 3);
  Tensor k = random_tensor({32, 16, 3, 3}, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv2d(x, k, 2, 1).data().data());
  }
}
BENCHMARK(BM_Conv2dForward)->Arg(1)->Arg(64);

void BM_CaeTrainStep(benchmark::State& state) {
  CaeConfig cfg;
  cfg.latent_dim = 16;
  CaeModel model = CaeModel::build(cfg, 42);
  Optimizer opt(OptimizerKind::Adam, 1e-3);
  Tensor batch = random_tensor({64, 1, 28, 28}, 5, 0.0, 1.0);
  LossSpec loss;
  loss.kind = LossKind::Lmse;
  for (auto _ : state) {
    model.zero_grad();
    Tensor out = model.forward(batch);
    Tensor l = loss_value(loss, batch, out);
    l.backward();
    opt.step(model.parameters());
    benchmark::DoNotOptimize(l.value());
  }
}
BENCHMARK(BM_CaeTrainStep);

void BM_CaeForwardEval(benchmark::State& state) {
  CaeConfig cfg;
  cfg.latent_dim = 16;
  CaeModel model = CaeModel::build(cfg, 42);
  Tensor batch = random_tensor({250, 1, 28, 28}, 6, 0.0, 1.0);
  for (auto _ : state) {
    NoGradGuard no_grad;
    benchmark::DoNotOptimize(model.forward(batch).data().data());
  }
}
BENCHMARK(BM_CaeForwardEval);

void BM_LossLmse(benchmark::State& state) {
  Tensor y = random_tensor({64, 1, 28, 28}, 7, 0.0, 1.0);
  Tensor p = random_tensor({64, 1, 28, 28}, 8, 0.0, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(lmse(y, p, 1e-7).value());
  }
}
BENCHMARK(BM_LossLmse);

void BM_Auroc(benchmark::State& state) {
  Xoshiro256ss rng(9);
  ScoreSet scores;
  for (int i = 0; i < 980; ++i) scores.normal.push_back(rng.uniform());
  for (int i = 0; i < 9020; ++i) scores.anomalous.push_back(rng.uniform(0.2, 1.2));
  for (auto _ : state) {
    benchmark::DoNotOptimize(auroc(scores));
  }
}
BENCHMARK(BM_Auroc);

}  // namespace

BENCHMARK_MAIN();
