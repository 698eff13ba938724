#include "fliplog/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <thread>

#include <nlohmann/json.hpp>

#include "fliplog/errors.hpp"
#include "fliplog/ops.hpp"
#include "fliplog/rng.hpp"

namespace fliplog {

namespace {

// Salt separating the batch-order stream from the weight-init stream, which
// both derive from the same run seed.
constexpr std::uint64_t kBatchOrderSalt = 0xd6e8feb86659fd93ULL;

constexpr std::int64_t kEvalBatch = 250;

}  // namespace

HyperGrid desk_grid() {
  HyperGrid grid;
  grid.latent_dims = {4, 16};
  grid.learning_rates = {1e-4, 1e-3};
  grid.seeds = {1, 2};
  grid.epochs = 5;
  grid.batch_size = 64;
  grid.train_cap = 2000;
  return grid;
}

HyperGrid full_grid() {
  HyperGrid grid;
  grid.latent_dims = {2, 4, 8, 16, 32};
  grid.learning_rates = {1e-4, 5e-4, 1e-3, 5e-3};
  grid.seeds = {1, 2, 3};
  grid.epochs = 30;
  grid.batch_size = 64;
  grid.train_cap = 0;
  return grid;
}

HyperGrid grid_for_scale(const std::string& scale) {
  if (scale == "desk") return desk_grid();
  if (scale == "full") return full_grid();
  throw ContractError("unknown scale '" + scale + "' (desk|full)");
}

namespace {

Tensor gather_batch(const ImageSet& set, const std::vector<std::int64_t>& order,
                    std::size_t begin, std::size_t end) {
  constexpr std::int64_t kPlane = 28 * 28;
  Tensor batch({static_cast<std::int64_t>(end - begin), 1, 28, 28});
  auto src = set.images.data();
  auto dst = batch.data();
  for (std::size_t i = begin; i < end; ++i) {
    std::memcpy(dst.data() + static_cast<std::int64_t>(i - begin) * kPlane,
                src.data() + order[i] * kPlane, kPlane * sizeof(double));
  }
  return batch;
}

/// Scores the whole test split in evaluation batches and splits the scores
/// by the task's binary labels.
ScoreSet score_test_split(const CaeModel& model, const AnomalyTask& task,
                          ScoreKind kind, double epsilon) {
  NoGradGuard no_grad;
  const std::int64_t total = task.test_all.size();
  ScoreSet scores;
  std::vector<std::int64_t> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), 0);
  for (std::int64_t begin = 0; begin < total; begin += kEvalBatch) {
    const std::int64_t end = std::min(total, begin + kEvalBatch);
    Tensor batch = gather_batch(task.test_all, order,
                                static_cast<std::size_t>(begin),
                                static_cast<std::size_t>(end));
    Tensor recon = model.forward(batch);
    std::vector<double> batch_scores =
        anomaly_scores(batch, recon, kind, epsilon);
    for (std::int64_t i = begin; i < end; ++i) {
      const double s = batch_scores[static_cast<std::size_t>(i - begin)];
      if (task.test_all.labels[static_cast<std::size_t>(i)] == 0) {
        scores.normal.push_back(s);
      } else {
        scores.anomalous.push_back(s);
      }
    }
  }
  return scores;
}

}  // namespace

RunResult train(const AnomalyTask& task, const RunConfig& config) {
  const auto start = std::chrono::steady_clock::now();

  RunResult result;
  result.task_id = task.id;
  result.loss_name = config.loss.name();
  result.latent_dim = config.cae.latent_dim;
  result.learning_rate = config.learning_rate;
  result.seed = config.seed;
  result.epochs = config.epochs;
  result.batch_size = config.batch_size;
  result.optimizer = to_string(config.optimizer);
  result.score_kind = to_string(config.score);
  result.loss_epsilon = config.loss.epsilon;

  if (config.epochs < 0 || config.batch_size < 1) {
    throw ContractError("train: epochs must be >= 0 and batch_size >= 1");
  }

  CaeModel model = CaeModel::build(config.cae, config.seed);
  Optimizer optimizer(config.optimizer, config.learning_rate);
  Xoshiro256ss order_rng(config.seed ^ kBatchOrderSalt);

  const std::int64_t n_train = task.train_normal.size();
  if (n_train < 1) throw ContractError("train: task has no training images");
  std::vector<std::int64_t> order(static_cast<std::size_t>(n_train));
  std::iota(order.begin(), order.end(), 0);

  std::int64_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(order, order_rng);
    double epoch_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      Tensor batch = gather_batch(task.train_normal, order, begin, end);
      model.zero_grad();
      Tensor recon = model.forward(batch);
      Tensor loss = loss_value(config.loss, batch, recon);
      const double loss_now = loss.value();
      if (!std::isfinite(loss_now)) {
        result.failed = true;
        result.fail_reason = "non-finite loss " + std::to_string(loss_now) +
                             " at step " + std::to_string(step);
        result.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                .count();
        return result;
      }
      loss.backward();
      optimizer.step(model.parameters());
      epoch_sum += loss_now * static_cast<double>(end - begin);
      ++step;
    }
    result.epoch_loss.push_back(epoch_sum / static_cast<double>(n_train));
  }

  ScoreSet scores =
      score_test_split(model, task, config.score, config.loss.epsilon);
  result.auroc = auroc(scores);
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return result;
}

std::vector<RunResult> grid_search(const AnomalyTask& task,
                                   const RunConfig& base, const HyperGrid& grid,
                                   int workers) {
  if (grid.latent_dims.empty() || grid.learning_rates.empty() ||
      grid.seeds.empty()) {
    throw ContractError("grid_search: every grid axis must be non-empty");
  }
  std::vector<RunConfig> configs;
  configs.reserve(grid.size());
  for (int latent : grid.latent_dims) {
    for (double lr : grid.learning_rates) {
      for (std::uint64_t seed : grid.seeds) {
        RunConfig cfg = base;
        cfg.cae.latent_dim = latent;
        cfg.learning_rate = lr;
        cfg.seed = seed;
        cfg.epochs = grid.epochs;
        cfg.batch_size = grid.batch_size;
        configs.push_back(cfg);
      }
    }
  }

  std::vector<RunResult> results(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= configs.size()) return;
      try {
        results[i] = train(task, configs[i]);
      } catch (const std::exception& e) {
        RunResult failed;
        failed.task_id = task.id;
        failed.loss_name = configs[i].loss.name();
        failed.latent_dim = configs[i].cae.latent_dim;
        failed.learning_rate = configs[i].learning_rate;
        failed.seed = configs[i].seed;
        failed.failed = true;
        failed.fail_reason = e.what();
        results[i] = failed;
      }
    }
  };

  const int n_threads = std::max(1, std::min<int>(workers, configs.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return results;
}

ArmAggregate aggregate_auroc(const std::vector<RunResult>& runs) {
  ArmAggregate agg;
  double sum = 0.0;
  for (const RunResult& r : runs) {
    if (r.failed) {
      ++agg.n_failed;
      continue;
    }
    sum += r.auroc;
    ++agg.n_runs;
  }
  if (agg.n_runs == 0) return agg;
  agg.mean = sum / agg.n_runs;
  double var = 0.0;
  for (const RunResult& r : runs) {
    if (r.failed) continue;
    const double d = r.auroc - agg.mean;
    var += d * d;
  }
  agg.stddev = std::sqrt(var / agg.n_runs);
  return agg;
}

std::vector<TableRow> reproduce_table(const TableOptions& options,
                                      const std::string& out_csv) {
  DatasetSplits splits = load_dataset(options.data_dir, options.dataset);
  const HyperGrid grid = grid_for_scale(options.scale);

  const LossKind arms[2] = {LossKind::Mse, LossKind::Lmse};
  std::vector<TableRow> rows;
  std::vector<RunResult> all_runs[2];
  for (int cls = 0; cls <= 9; ++cls) {
    AnomalyTask task =
        make_task(splits.train, splits.test, cls, grid.train_cap);
    for (int arm = 0; arm < 2; ++arm) {
      RunConfig base = options.base;
      base.loss.kind = arms[arm];
      std::vector<RunResult> runs =
          grid_search(task, base, grid, options.workers);
      const ArmAggregate agg = aggregate_auroc(runs);
      rows.push_back({std::to_string(cls), to_string(arms[arm]), agg.mean,
                      agg.stddev, agg.n_runs});
      all_runs[arm].insert(all_runs[arm].end(), runs.begin(), runs.end());
    }
  }
  for (int arm = 0; arm < 2; ++arm) {
    const ArmAggregate agg = aggregate_auroc(all_runs[arm]);
    rows.push_back(
        {"total", to_string(arms[arm]), agg.mean, agg.stddev, agg.n_runs});
  }
  if (!out_csv.empty()) write_table_csv(rows, out_csv);
  return rows;
}

void write_table_csv(const std::vector<TableRow>& rows,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out << "class,loss,auroc_mean,auroc_std,n_runs\n";
  char buf[64];
  for (const TableRow& row : rows) {
    out << row.cls << ',' << row.loss << ',';
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", row.auroc_mean, row.auroc_std);
    out << buf << ',' << row.n_runs << '\n';
  }
}

void emit_convergence(const std::map<std::string, std::vector<RunResult>>& arms,
                      const std::string& out_csv) {
  std::ofstream out(out_csv);
  if (!out) throw FormatError("cannot open '" + out_csv + "' for writing");
  out << "epoch,loss_kind,mean,std,min,max\n";
  char buf[128];
  for (const auto& [name, runs] : arms) {
    std::vector<std::vector<double>> curves;
    for (const RunResult& r : runs) {
      if (!r.failed && !r.epoch_loss.empty()) curves.push_back(r.epoch_loss);
    }
    if (curves.empty()) continue;
    const ConvergenceStats stats = convergence_stats(curves);
    for (std::size_t e = 0; e < stats.mean.size(); ++e) {
      double lo = curves[0][e];
      double hi = curves[0][e];
      for (const auto& curve : curves) {
        lo = std::min(lo, curve[e]);
        hi = std::max(hi, curve[e]);
      }
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g", stats.mean[e],
                    stats.stddev[e], lo, hi);
      out << e << ',' << name << ',' << buf << '\n';
    }
  }
}

namespace {

nlohmann::json result_to_json_doc(const RunResult& r) {
  return nlohmann::json{{"task", r.task_id},
                        {"loss", r.loss_name},
                        {"latent_dim", r.latent_dim},
                        {"learning_rate", r.learning_rate},
                        {"seed", r.seed},
                        {"epochs", r.epochs},
                        {"batch_size", r.batch_size},
                        {"optimizer", r.optimizer},
                        {"score_kind", r.score_kind},
                        {"loss_epsilon", r.loss_epsilon},
                        {"epoch_loss", r.epoch_loss},
                        {"auroc", r.auroc},
                        {"wall_seconds", r.wall_seconds},
                        {"failed", r.failed},
                        {"fail_reason", r.fail_reason}};
}

}  // namespace

std::string run_result_to_json(const RunResult& result) {
  return result_to_json_doc(result).dump(2);
}

RunResult run_result_from_json(const std::string& json_text) {
  nlohmann::json doc = nlohmann::json::parse(json_text);
  RunResult r;
  r.task_id = doc.at("task").get<std::string>();
  r.loss_name = doc.at("loss").get<std::string>();
  r.latent_dim = doc.at("latent_dim").get<int>();
  r.learning_rate = doc.at("learning_rate").get<double>();
  r.seed = doc.at("seed").get<std::uint64_t>();
  r.epochs = doc.at("epochs").get<int>();
  r.batch_size = doc.at("batch_size").get<int>();
  r.optimizer = doc.at("optimizer").get<std::string>();
  r.score_kind = doc.at("score_kind").get<std::string>();
  r.loss_epsilon = doc.at("loss_epsilon").get<double>();
  r.epoch_loss = doc.at("epoch_loss").get<std::vector<double>>();
  r.auroc = doc.at("auroc").get<double>();
  r.wall_seconds = doc.at("wall_seconds").get<double>();
  r.failed = doc.at("failed").get<bool>();
  r.fail_reason = doc.at("fail_reason").get<std::string>();
  return r;
}

void write_metrics_json(const RunResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out << run_result_to_json(result) << '\n';
}

namespace {

void reject_unknown_keys(const nlohmann::json& obj,
                         std::initializer_list<const char*> known,
                         const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw FormatError("config: unknown key '" + key + "' in " + where);
  }
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text,
                                         const ExperimentConfig& defaults) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config: invalid JSON: ") + e.what());
  }
  ExperimentConfig cfg = defaults;
  reject_unknown_keys(doc, {"grid", "cae", "loss", "optimizer", "score"},
                      "top level");
  if (doc.contains("grid")) {
    const auto& g = doc["grid"];
    reject_unknown_keys(g,
                        {"latent_dims", "learning_rates", "seeds", "epochs",
                         "batch_size", "train_cap"},
                        "grid");
    if (g.contains("latent_dims"))
      cfg.grid.latent_dims = g["latent_dims"].get<std::vector<int>>();
    if (g.contains("learning_rates"))
      cfg.grid.learning_rates = g["learning_rates"].get<std::vector<double>>();
    if (g.contains("seeds"))
      cfg.grid.seeds = g["seeds"].get<std::vector<std::uint64_t>>();
    if (g.contains("epochs")) cfg.grid.epochs = g["epochs"].get<int>();
    if (g.contains("batch_size"))
      cfg.grid.batch_size = g["batch_size"].get<int>();
    if (g.contains("train_cap"))
      cfg.grid.train_cap = g["train_cap"].get<std::int64_t>();
  }
  if (doc.contains("cae")) {
    const auto& c = doc["cae"];
    reject_unknown_keys(c, {"encoder_channels", "kernel", "latent_dim"}, "cae");
    if (c.contains("encoder_channels"))
      cfg.base.cae.encoder_channels =
          c["encoder_channels"].get<std::vector<int>>();
    if (c.contains("kernel")) cfg.base.cae.kernel = c["kernel"].get<int>();
    if (c.contains("latent_dim"))
      cfg.base.cae.latent_dim = c["latent_dim"].get<int>();
  }
  if (doc.contains("loss")) {
    const auto& l = doc["loss"];
    reject_unknown_keys(l, {"kind", "fl_inner", "epsilon", "scale_trick"},
                        "loss");
    if (l.contains("kind"))
      cfg.base.loss.kind = loss_kind_from_string(l["kind"].get<std::string>());
    if (l.contains("fl_inner"))
      cfg.base.loss.fl_inner =
          loss_kind_from_string(l["fl_inner"].get<std::string>());
    if (l.contains("epsilon")) cfg.base.loss.epsilon = l["epsilon"].get<double>();
    if (l.contains("scale_trick"))
      cfg.base.loss.scale_trick = l["scale_trick"].get<bool>();
  }
  if (doc.contains("optimizer")) {
    cfg.base.optimizer =
        optimizer_kind_from_string(doc["optimizer"].get<std::string>());
  }
  if (doc.contains("score")) {
    cfg.base.score = score_kind_from_string(doc["score"].get<std::string>());
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path,
                                        const ExperimentConfig& defaults) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_experiment_config(text, defaults);
}

}  // namespace fliplog
