// Command-line front end: train single runs, sweep grids, reproduce the
// per-class AUROC tables, export loss/gradient surfaces, and run the numeric
// verification suite.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fliplog/data.hpp"
#include "fliplog/harness.hpp"
#include "fliplog/losses.hpp"
#include "fliplog/verify.hpp"

namespace {

using namespace fliplog;

struct CommonTrainArgs {
  std::string dataset = "mnist";
  int normal_class = 0;
  std::string loss = "mse";
  double eps = 1e-7;
  std::string data_dir = "data";
  std::string optimizer = "adam";
  std::string score = "mse";
  std::string config_path;
};

void add_common(CLI::App* cmd, CommonTrainArgs& args) {
  cmd->add_option("--dataset", args.dataset, "Dataset id")
      ->check(CLI::IsMember({"mnist", "fmnist"}));
  cmd->add_option("--normal-class", args.normal_class,
                  "Class treated as normal (one-class protocol)")
      ->check(CLI::Range(0, 9));
  cmd->add_option("--loss", args.loss, "Training loss")
      ->check(CLI::IsMember({"mse", "mae", "msle", "lmse"}));
  cmd->add_option("--eps", args.eps, "Epsilon inside the log argument");
  cmd->add_option("--data-dir", args.data_dir, "Directory with dataset files");
  cmd->add_option("--optimizer", args.optimizer, "Parameter update rule")
      ->check(CLI::IsMember({"adam", "sgd"}));
  cmd->add_option("--score", args.score, "Per-sample anomaly score")
      ->check(CLI::IsMember({"mse", "lmse"}));
  cmd->add_option("--config", args.config_path,
                  "JSON config (grid + cae + loss), overridden by flags");
}

RunConfig base_run_config(const CommonTrainArgs& args) {
  RunConfig cfg;
  cfg.loss.kind = loss_kind_from_string(args.loss);
  cfg.loss.epsilon = args.eps;
  cfg.optimizer = optimizer_kind_from_string(args.optimizer);
  cfg.score = score_kind_from_string(args.score);
  return cfg;
}

int cmd_train(const CommonTrainArgs& common, int latent, double lr, int epochs,
              int batch, std::uint64_t seed, std::int64_t train_cap,
              const std::string& out_path) {
  RunConfig cfg = base_run_config(common);
  if (!common.config_path.empty()) {
    ExperimentConfig defaults{desk_grid(), cfg};
    cfg = load_experiment_config(common.config_path, defaults).base;
  }
  cfg.cae.latent_dim = latent;
  cfg.learning_rate = lr;
  cfg.epochs = epochs;
  cfg.batch_size = batch;
  cfg.seed = seed;

  DatasetSplits splits = load_dataset(common.data_dir, common.dataset);
  AnomalyTask task =
      make_task(splits.train, splits.test, common.normal_class, train_cap);
  std::cout << "task " << task.id << ": " << task.train_normal.size()
            << " train images, " << task.test_all.size() << " test images\n";

  RunResult result = train(task, cfg);
  if (result.failed) {
    std::cerr << "run failed: " << result.fail_reason << "\n";
    return 1;
  }
  std::cout << "loss " << result.loss_name << "  latent " << result.latent_dim
            << "  lr " << result.learning_rate << "  seed " << result.seed
            << "\n";
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
    std::cout << "  epoch " << e << ": mean loss " << result.epoch_loss[e]
              << "\n";
  }
  std::cout << "AUROC " << result.auroc << "  (" << result.wall_seconds
            << " s)\n";
  if (!out_path.empty()) {
    write_metrics_json(result, out_path);
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Log-scaled reconstruction losses, CAE anomaly detection and numeric "
      "verification"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train one CAE run");
  CommonTrainArgs train_args;
  int latent = 16;
  double lr = 1e-3;
  int epochs = 5;
  int batch = 64;
  std::uint64_t seed = 1;
  std::int64_t train_cap = 0;
  std::string out_path;
  add_common(train_cmd, train_args);
  train_cmd->add_option("--latent", latent, "Latent dimension");
  train_cmd->add_option("--lr", lr, "Learning rate");
  train_cmd->add_option("--epochs", epochs, "Training epochs");
  train_cmd->add_option("--batch", batch, "Batch size");
  train_cmd->add_option("--seed", seed, "Run seed");
  train_cmd->add_option("--train-cap", train_cap,
                        "Cap on normal-class training images (0 = all)");
  train_cmd->add_option("--out", out_path, "metrics.json output path");

  // grid
  auto* grid_cmd =
      app.add_subcommand("grid", "Grid search over latent dims and learning rates");
  CommonTrainArgs grid_args;
  std::string grid_scale = "desk";
  std::string grid_out = "grid_out";
  int workers = 2;
  add_common(grid_cmd, grid_args);
  grid_cmd->add_option("--scale", grid_scale, "Grid preset")
      ->check(CLI::IsMember({"desk", "full"}));
  grid_cmd->add_option("--out", grid_out, "Output directory");
  grid_cmd->add_option("--workers", workers, "Parallel runs");

  // table
  auto* table_cmd = app.add_subcommand(
      "table", "Per-class AUROC table over both loss arms (all 10 classes)");
  CommonTrainArgs table_args;
  std::string table_scale = "desk";
  std::string table_out = "table.csv";
  int table_workers = 2;
  add_common(table_cmd, table_args);
  table_cmd->add_option("--scale", table_scale, "Grid preset")
      ->check(CLI::IsMember({"desk", "full"}));
  table_cmd->add_option("--out", table_out, "table.csv output path");
  table_cmd->add_option("--workers", table_workers, "Parallel runs");

  // surface
  auto* surface_cmd =
      app.add_subcommand("surface", "Sample a loss or gradient surface to CSV");
  std::string surf_loss = "lmse";
  std::string surf_quantity = "loss";
  int resolution = 101;
  double clip = 10.0;
  bool no_clip = false;
  double surf_eps = 1e-7;
  std::string surf_out = "surface.csv";
  surface_cmd->add_option("--loss", surf_loss, "Loss kind")
      ->check(CLI::IsMember({"mse", "mae", "msle", "lmse"}));
  surface_cmd->add_option("--quantity", surf_quantity, "Surface quantity")
      ->check(CLI::IsMember({"loss", "gradient"}));
  surface_cmd->add_option("--resolution", resolution, "Grid points per axis");
  surface_cmd->add_option("--clip", clip, "Clip threshold for cells");
  surface_cmd->add_flag("--no-clip", no_clip, "Disable clipping");
  surface_cmd->add_option("--eps", surf_eps, "Epsilon inside the log argument");
  surface_cmd->add_option("--out", surf_out, "CSV output path");

  // verify
  auto* verify_cmd =
      app.add_subcommand("verify", "Numeric verification suite");
  std::string suite = "all";
  std::uint64_t verify_seed = 20240901;
  std::string verify_out;
  verify_cmd->add_option("--suite", suite, "Which checks to run")
      ->check(CLI::IsMember(
          {"gradients", "convexity", "closed-form", "taylor", "all"}));
  verify_cmd->add_option("--seed", verify_seed, "Sampling seed");
  verify_cmd->add_option("--out", verify_out, "JSON report path");

  // fetch
  auto* fetch_cmd =
      app.add_subcommand("fetch", "Download a dataset from a mirror");
  std::string fetch_dataset_id = "mnist";
  std::string fetch_dir = "data";
  std::string mirror;
  fetch_cmd->add_option("--dataset", fetch_dataset_id, "Dataset id")
      ->check(CLI::IsMember({"mnist", "fmnist"}));
  fetch_cmd->add_option("--data-dir", fetch_dir, "Destination directory");
  fetch_cmd->add_option("--mirror", mirror, "http:// mirror base URL");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) {
      return cmd_train(train_args, latent, lr, epochs, batch, seed, train_cap,
                       out_path);
    }

    if (grid_cmd->parsed()) {
      ExperimentConfig cfg{grid_for_scale(grid_scale),
                           base_run_config(grid_args)};
      if (!grid_args.config_path.empty()) {
        cfg = load_experiment_config(grid_args.config_path, cfg);
      }
      DatasetSplits splits = load_dataset(grid_args.data_dir, grid_args.dataset);
      AnomalyTask task = make_task(splits.train, splits.test,
                                   grid_args.normal_class, cfg.grid.train_cap);
      std::cout << "task " << task.id << ": " << cfg.grid.size()
                << " grid points\n";
      std::vector<RunResult> runs =
          grid_search(task, cfg.base, cfg.grid, workers);

      std::filesystem::create_directories(grid_out);
      int failures = 0;
      for (std::size_t i = 0; i < runs.size(); ++i) {
        write_metrics_json(runs[i], grid_out + "/run" + std::to_string(i) +
                                        ".metrics.json");
        if (runs[i].failed) {
          ++failures;
          std::cerr << "run " << i << " failed: " << runs[i].fail_reason << "\n";
        }
      }
      const ArmAggregate agg = aggregate_auroc(runs);
      emit_convergence({{cfg.base.loss.name(), runs}},
                       grid_out + "/convergence.csv");
      std::cout << "AUROC " << agg.mean << " +/- " << agg.stddev << " over "
                << agg.n_runs << " runs";
      if (failures) std::cout << " (" << failures << " failed)";
      std::cout << "\nwrote " << grid_out << "/\n";
      return failures == static_cast<int>(runs.size()) ? 1 : 0;
    }

    if (table_cmd->parsed()) {
      TableOptions options;
      options.dataset = table_args.dataset;
      options.data_dir = table_args.data_dir;
      options.scale = table_scale;
      options.workers = table_workers;
      options.base = base_run_config(table_args);
      if (!table_args.config_path.empty()) {
        ExperimentConfig cfg{grid_for_scale(table_scale), options.base};
        options.base = load_experiment_config(table_args.config_path, cfg).base;
      }
      std::vector<TableRow> rows = reproduce_table(options, table_out);
      for (const TableRow& row : rows) {
        std::cout << row.cls << "  " << row.loss << "  " << row.auroc_mean
                  << " +/- " << row.auroc_std << "  (" << row.n_runs
                  << " runs)\n";
      }
      std::cout << "wrote " << table_out << "\n";
      return 0;
    }

    if (surface_cmd->parsed()) {
      std::optional<double> clip_opt;
      if (!no_clip) clip_opt = clip;
      SurfaceGrid grid = surface_grid(
          loss_kind_from_string(surf_loss),
          surf_quantity == "loss" ? SurfaceQuantity::Loss
                                  : SurfaceQuantity::Gradient,
          resolution, clip_opt, surf_eps);
      write_surface_csv(grid, surf_out);
      std::cout << "wrote " << surf_out << " (" << resolution << "x"
                << resolution << ")\n";
      return 0;
    }

    if (verify_cmd->parsed()) {
      std::vector<CheckReport> reports = run_verify_suite(suite, verify_seed);
      print_reports(reports, std::cout);
      if (!verify_out.empty()) {
        std::ofstream out(verify_out);
        out << reports_to_json(reports) << "\n";
        std::cout << "wrote " << verify_out << "\n";
      }
      return all_pass(reports) ? 0 : 1;
    }

    if (fetch_cmd->parsed()) {
      if (mirror.empty()) mirror = default_mirror(fetch_dataset_id);
      std::cout << "fetching " << fetch_dataset_id << " from " << mirror
                << "\n";
      fetch_dataset(fetch_dataset_id, fetch_dir, mirror);
      std::cout << "ok\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
