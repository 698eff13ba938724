#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fliplog/data.hpp"
#include "fliplog/losses.hpp"
#include "fliplog/metrics.hpp"
#include "fliplog/model.hpp"
#include "fliplog/optim.hpp"

namespace fliplog {

/// Cartesian sweep axes plus the fixed budget shared by every grid point.
struct HyperGrid {
  std::vector<int> latent_dims;
  std::vector<double> learning_rates;
  std::vector<std::uint64_t> seeds;
  int epochs = 5;
  int batch_size = 64;
  std::int64_t train_cap = 0;  // 0 = use every normal-class image

  std::size_t size() const {
    return latent_dims.size() * learning_rates.size() * seeds.size();
  }
};

/// Desk scale: small paired sweep that finishes in minutes.
HyperGrid desk_grid();
/// Full scale: the sweep used for whole-table runs (hours of compute).
HyperGrid full_grid();
HyperGrid grid_for_scale(const std::string& scale);

/// Everything that defines a single training run.
struct RunConfig {
  CaeConfig cae;
  LossSpec loss;
  int epochs = 5;
  int batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  OptimizerKind optimizer = OptimizerKind::Adam;
  ScoreKind score = ScoreKind::Mse;
};

struct RunResult {
  std::string task_id;
  std::string loss_name;
  int latent_dim = 0;
  double learning_rate = 0.0;
  std::uint64_t seed = 0;
  int epochs = 0;
  int batch_size = 0;
  std::string optimizer;
  std::string score_kind;
  double loss_epsilon = 0.0;
  std::vector<double> epoch_loss;  // per-epoch mean training loss
  double auroc = 0.0;
  double wall_seconds = 0.0;
  bool failed = false;
  std::string fail_reason;
};

/// Trains a CAE on the task's normal-class images and scores the full test
/// split. Deterministic for a fixed config: the seed fixes the weight init
/// and the per-epoch batch order, and execution is single-threaded. A
/// non-finite loss aborts the run, recording the step index and loss value.
RunResult train(const AnomalyTask& task, const RunConfig& config);

/// One run per (latent_dim, learning_rate, seed) grid point. Runs execute on
/// `workers` threads; each run is itself single-threaded and results keep
/// grid order. Failed runs are recorded, not propagated.
std::vector<RunResult> grid_search(const AnomalyTask& task,
                                   const RunConfig& base, const HyperGrid& grid,
                                   int workers = 1);

/// Mean +/- population std AUROC over the successful runs of one arm.
struct ArmAggregate {
  double mean = 0.0;
  double stddev = 0.0;
  int n_runs = 0;
  int n_failed = 0;
};
ArmAggregate aggregate_auroc(const std::vector<RunResult>& runs);

struct TableRow {
  std::string cls;  // "0".."9" or "total"
  std::string loss;
  double auroc_mean = 0.0;
  double auroc_std = 0.0;
  int n_runs = 0;
};

struct TableOptions {
  std::string dataset = "mnist";
  std::string data_dir = "data";
  std::string scale = "desk";
  int workers = 1;
  RunConfig base;  // loss kind is overridden per arm (MSE vs LMSE)
};

/// Paired MSE/LMSE grid sweep over all 10 one-class tasks. Emits one row per
/// class per loss plus a "total" row per loss aggregating every run of that
/// arm, written as CSV (class,loss,auroc_mean,auroc_std,n_runs).
std::vector<TableRow> reproduce_table(const TableOptions& options,
                                      const std::string& out_csv);

void write_table_csv(const std::vector<TableRow>& rows,
                     const std::string& path);

/// Per-epoch mean/std/min/max per loss arm as CSV
/// (epoch,loss_kind,mean,std,min,max).
void emit_convergence(const std::map<std::string, std::vector<RunResult>>& arms,
                      const std::string& out_csv);

/// metrics.json round-trip for a single run.
std::string run_result_to_json(const RunResult& result);
RunResult run_result_from_json(const std::string& json_text);
void write_metrics_json(const RunResult& result, const std::string& path);

/// JSON config file mirroring HyperGrid + CaeConfig + LossSpec; unknown keys
/// are rejected. Missing keys keep the supplied defaults.
struct ExperimentConfig {
  HyperGrid grid;
  RunConfig base;
};
ExperimentConfig parse_experiment_config(const std::string& json_text,
                                         const ExperimentConfig& defaults);
ExperimentConfig load_experiment_config(const std::string& path,
                                        const ExperimentConfig& defaults);

}  // namespace fliplog
