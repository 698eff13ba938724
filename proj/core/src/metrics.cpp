#include "fliplog/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fliplog/errors.hpp"

namespace fliplog {

std::string to_string(ScoreKind kind) {
  return kind == ScoreKind::Mse ? "mse" : "lmse";
}

ScoreKind score_kind_from_string(const std::string& name) {
  if (name == "mse") return ScoreKind::Mse;
  if (name == "lmse") return ScoreKind::Lmse;
  throw ContractError("unknown score kind '" + name + "'");
}

std::vector<double> anomaly_scores(const Tensor& y, const Tensor& yhat,
                                   ScoreKind kind, double epsilon) {
  if (y.shape() != yhat.shape()) {
    throw ShapeError("anomaly_scores: shape mismatch " + shape_str(y.shape()) +
                     " vs " + shape_str(yhat.shape()));
  }
  if (y.rank() < 1 || y.shape()[0] < 1) {
    throw ShapeError("anomaly_scores: need a leading sample axis");
  }
  const std::int64_t samples = y.shape()[0];
  const std::int64_t per_sample = y.numel() / samples;
  auto yv = y.data();
  auto pv = yhat.data();
  std::vector<double> scores(static_cast<std::size_t>(samples));
  for (std::int64_t s = 0; s < samples; ++s) {
    const double* ys = yv.data() + s * per_sample;
    const double* ps = pv.data() + s * per_sample;
    double acc = 0.0;
    if (kind == ScoreKind::Mse) {
      for (std::int64_t i = 0; i < per_sample; ++i) {
        const double d = ys[i] - ps[i];
        acc += d * d;
      }
    } else {
      for (std::int64_t i = 0; i < per_sample; ++i) {
        const double d = ys[i] - ps[i];
        const double e = d * d;
        if (e > 1.0) {
          throw DomainError("anomaly_scores: (y - yhat)^2 > 1 at sample " +
                            std::to_string(s));
        }
        acc += -std::log(1.0 + epsilon - e);
      }
    }
    scores[static_cast<std::size_t>(s)] = acc / static_cast<double>(per_sample);
  }
  return scores;
}

double auroc(const ScoreSet& scores) {
  const std::size_t n_normal = scores.normal.size();
  const std::size_t n_anom = scores.anomalous.size();
  if (n_normal == 0 || n_anom == 0) {
    throw ContractError("auroc: both score classes must be non-empty");
  }
  // Pool the scores, sort once, and give tied values their mid-rank.
  struct Entry {
    double score;
    bool anomalous;
  };
  std::vector<Entry> pool;
  pool.reserve(n_normal + n_anom);
  for (double s : scores.normal) pool.push_back({s, false});
  for (double s : scores.anomalous) pool.push_back({s, true});
  std::sort(pool.begin(), pool.end(),
            [](const Entry& a, const Entry& b) { return a.score < b.score; });

  double rank_sum_anom = 0.0;
  std::size_t i = 0;
  while (i < pool.size()) {
    std::size_t j = i;
    while (j < pool.size() && pool[j].score == pool[i].score) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t t = i; t < j; ++t) {
      if (pool[t].anomalous) rank_sum_anom += mid_rank;
    }
    i = j;
  }
  const double n1 = static_cast<double>(n_anom);
  const double u = rank_sum_anom - n1 * (n1 + 1.0) / 2.0;
  return u / (n1 * static_cast<double>(n_normal));
}

ConvergenceStats convergence_stats(
    const std::vector<std::vector<double>>& loss_curves) {
  if (loss_curves.empty()) {
    throw ContractError("convergence_stats: no loss curves");
  }
  std::size_t epochs = loss_curves.front().size();
  for (const auto& curve : loss_curves) epochs = std::min(epochs, curve.size());

  ConvergenceStats stats;
  stats.run_count = static_cast<int>(loss_curves.size());
  stats.mean.resize(epochs);
  stats.stddev.resize(epochs);
  const double inv_n = 1.0 / static_cast<double>(loss_curves.size());
  for (std::size_t e = 0; e < epochs; ++e) {
    double mean = 0.0;
    for (const auto& curve : loss_curves) mean += curve[e];
    mean *= inv_n;
    double var = 0.0;
    for (const auto& curve : loss_curves) {
      const double d = curve[e] - mean;
      var += d * d;
    }
    stats.mean[e] = mean;
    stats.stddev[e] = std::sqrt(var * inv_n);
  }
  return stats;
}

}  // namespace fliplog
