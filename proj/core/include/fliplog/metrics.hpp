#pragma once

#include <string>
#include <vector>

#include "fliplog/tensor.hpp"

namespace fliplog {

/// Which per-sample reconstruction-error reduction feeds the detector.
/// Per-sample LMSE is not a monotone function of per-sample MSE (the log is
/// applied per pixel, before the mean), so the choice is surfaced.
enum class ScoreKind { Mse, Lmse };

std::string to_string(ScoreKind kind);
ScoreKind score_kind_from_string(const std::string& name);

/// Per-sample anomaly scores: reduces each sample's own elements (higher =
/// more anomalous). Leading axis of y/yhat is the sample axis.
std::vector<double> anomaly_scores(const Tensor& y, const Tensor& yhat,
                                   ScoreKind kind, double epsilon = 1e-7);

struct ScoreSet {
  std::vector<double> normal;
  std::vector<double> anomalous;
};

/// Area under the ROC curve via the rank-sum statistic:
/// P(anomalous > normal) + 0.5 * P(tie). Sort-based, O((n+m) log(n+m)).
double auroc(const ScoreSet& scores);

/// Per-epoch mean and population standard deviation across runs.
struct ConvergenceStats {
  std::vector<double> mean;
  std::vector<double> stddev;
  int run_count = 0;
};

/// Curves of unequal length are truncated to the shortest.
ConvergenceStats convergence_stats(
    const std::vector<std::vector<double>>& loss_curves);

}  // namespace fliplog
