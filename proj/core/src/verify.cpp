#include "fliplog/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include <nlohmann/json.hpp>

#include "fliplog/errors.hpp"
#include "fliplog/ops.hpp"

namespace fliplog {

namespace {

// Pinned check tolerances.
constexpr int kGradientSamples = 100;
constexpr double kGradientStep = 1e-5;
constexpr double kGradientTolMse = 1e-6;
constexpr double kGradientTolLmse = 1e-4;
constexpr double kRouteTol = 1e-12;
constexpr int kConvexityTrials = 1000;
constexpr double kConvexityTol = 1e-9;
constexpr int kClosedFormInstances = 50;
constexpr double kClosedFormTol = 1e-8;
constexpr int kTaylorTerms = 60;
constexpr double kTaylorTol = 1e-6;
constexpr double kCondLimit = 1e6;
constexpr double kResidualCeiling = 0.9;
constexpr double kLmseEps = 1e-7;

double rel_err(double a, double b) {
  return std::fabs(a - b) / std::max({1.0, std::fabs(a), std::fabs(b)});
}

Tensor random_tensor(Xoshiro256ss& rng, Shape shape, double lo, double hi) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

/// Symmetric Jacobi eigenvalue sweeps on a small dense matrix (row-major).
std::vector<double> symmetric_eigenvalues(std::vector<double> a, int n) {
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
    if (off < 1e-24) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (apq == 0.0) continue;
        const double app = a[p * n + p];
        const double aqq = a[q * n + q];
        const double theta = 0.5 * (aqq - app) / apq;
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int i = 0; i < n; ++i) {
          const double aip = a[i * n + p];
          const double aiq = a[i * n + q];
          a[i * n + p] = c * aip - s * aiq;
          a[i * n + q] = s * aip + c * aiq;
        }
        for (int i = 0; i < n; ++i) {
          const double api = a[p * n + i];
          const double aqi = a[q * n + i];
          a[p * n + i] = c * api - s * aqi;
          a[q * n + i] = s * api + c * aqi;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (int i = 0; i < n; ++i) eig[i] = a[i * n + i];
  return eig;
}

std::vector<double> gram_matrix(const Tensor& x) {
  const std::int64_t n = x.shape()[0];
  const std::int64_t f = x.shape()[1];
  std::vector<double> gram(static_cast<std::size_t>(f * f), 0.0);
  auto xv = x.data();
  for (std::int64_t r = 0; r < n; ++r) {
    const double* row = xv.data() + r * f;
    for (std::int64_t i = 0; i < f; ++i)
      for (std::int64_t j = 0; j < f; ++j) gram[i * f + j] += row[i] * row[j];
  }
  return gram;
}

/// Cholesky solve of the SPD system G w = b for multiple right-hand sides
/// (b is f x k, row-major).
std::vector<double> cholesky_solve(std::vector<double> g, int f,
                                   std::vector<double> b, int k) {
  // In-place lower factor.
  for (int i = 0; i < f; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = g[i * f + j];
      for (int t = 0; t < j; ++t) s -= g[i * f + t] * g[j * f + t];
      if (i == j) {
        if (s <= 0.0) throw ContractError("cholesky: matrix not positive definite");
        g[i * f + i] = std::sqrt(s);
      } else {
        g[i * f + j] = s / g[j * f + j];
      }
    }
  }
  // Forward then backward substitution per right-hand side.
  for (int c = 0; c < k; ++c) {
    for (int i = 0; i < f; ++i) {
      double s = b[i * k + c];
      for (int t = 0; t < i; ++t) s -= g[i * f + t] * b[t * k + c];
      b[i * k + c] = s / g[i * f + i];
    }
    for (int i = f - 1; i >= 0; --i) {
      double s = b[i * k + c];
      for (int t = i + 1; t < f; ++t) s -= g[t * f + i] * b[t * k + c];
      b[i * k + c] = s / g[i * f + i];
    }
  }
  return b;
}

double loss_at(LossKind kind, const Tensor& y, const Tensor& pred) {
  NoGradGuard no_grad;
  if (kind == LossKind::Mse) return mse(y, pred).value();
  return lmse(y, pred, kLmseEps).value();
}

double max_abs(std::span<const double> values) {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::fabs(v));
  return m;
}

}  // namespace

double gram_condition(const Tensor& x) {
  const int f = static_cast<int>(x.shape()[1]);
  std::vector<double> eig = symmetric_eigenvalues(gram_matrix(x), f);
  double lo = eig[0], hi = eig[0];
  for (double e : eig) {
    lo = std::min(lo, e);
    hi = std::max(hi, e);
  }
  if (lo <= 0.0) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

LinearInstance make_linear_instance(Xoshiro256ss& rng, int n, int f, int k,
                                    bool realizable) {
  LinearInstance inst;
  for (int attempt = 0; attempt < 100; ++attempt) {
    inst.x = random_tensor(rng, {n, f}, -1.0, 1.0);
    if (gram_condition(inst.x) < kCondLimit) break;
    if (attempt == 99) throw ContractError("could not draw a well-conditioned X");
  }
  inst.w_true = random_tensor(rng, {f, k}, -0.5, 0.5);
  inst.y = matmul(inst.x, inst.w_true);
  if (!realizable) {
    for (double& v : inst.y.data()) v += rng.uniform(-0.2, 0.2);
  }
  return inst;
}

Tensor solve_normal_equations(const Tensor& x, const Tensor& y) {
  const int f = static_cast<int>(x.shape()[1]);
  const int k = static_cast<int>(y.shape()[1]);
  const std::int64_t n = x.shape()[0];
  std::vector<double> rhs(static_cast<std::size_t>(f * k), 0.0);
  auto xv = x.data();
  auto yv = y.data();
  for (std::int64_t r = 0; r < n; ++r) {
    for (int i = 0; i < f; ++i) {
      const double xi = xv[r * f + i];
      for (int c = 0; c < k; ++c) rhs[i * k + c] += xi * yv[r * k + c];
    }
  }
  std::vector<double> w = cholesky_solve(gram_matrix(x), f, std::move(rhs), k);
  return Tensor({f, k}, std::move(w));
}

CheckReport check_convexity(LossKind kind, int trials, double tol,
                            std::uint64_t seed) {
  if (kind != LossKind::Mse && kind != LossKind::Lmse) {
    throw ContractError("check_convexity: loss must be mse or lmse");
  }
  Xoshiro256ss rng(seed);
  CheckReport report;
  report.name = "convexity/" + to_string(kind);
  report.trials = trials;
  const double lambdas[3] = {0.25, 0.5, 0.75};
  double worst = -std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < trials; ++trial) {
    const int f = 2 + static_cast<int>(rng.below(5));
    const int k = 1 + static_cast<int>(rng.below(4));
    const int n = 3 * f + static_cast<int>(rng.below(30));  // overdetermined
    LinearInstance inst = make_linear_instance(rng, n, f, k, false);
    Tensor w1 = random_tensor(rng, {f, k}, -1.0, 1.0);
    Tensor w2 = random_tensor(rng, {f, k}, -1.0, 1.0);

    // Rescale targets and weights together so every tested residual stays
    // inside the log domain: |Y - XW| scales linearly under (Y, W) -> s(Y, W).
    double r_max = std::max(max_abs(sub(inst.y, matmul(inst.x, w1)).data()),
                            max_abs(sub(inst.y, matmul(inst.x, w2)).data()));
    if (r_max > kResidualCeiling) {
      const double s = kResidualCeiling / r_max;
      for (double& v : inst.y.data()) v *= s;
      for (double& v : w1.data()) v *= s;
      for (double& v : w2.data()) v *= s;
    }

    const double l1 = loss_at(kind, inst.y, matmul(inst.x, w1));
    const double l2 = loss_at(kind, inst.y, matmul(inst.x, w2));
    bool violated = false;
    for (double lambda : lambdas) {
      Tensor w_mid = add(mul_scalar(w1, lambda), mul_scalar(w2, 1.0 - lambda));
      const double l_mid = loss_at(kind, inst.y, matmul(inst.x, w_mid));
      const double slack = l_mid - (lambda * l1 + (1.0 - lambda) * l2);
      worst = std::max(worst, slack);
      if (slack > tol) violated = true;
    }
    if (violated) ++report.violations;
  }
  report.worst = worst;
  report.pass = report.violations == 0;
  report.stats.push_back({"tol", tol});
  return report;
}

CheckReport check_closed_form(int instances, double tol, std::uint64_t seed) {
  Xoshiro256ss rng(seed);
  CheckReport report;
  report.name = "closed-form";
  report.trials = instances;
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    const int k = 1 + static_cast<int>(rng.below(3));
    LinearInstance inst = make_linear_instance(rng, 50, 5, k, /*realizable=*/true);
    Tensor w_star = solve_normal_equations(inst.x, inst.y);

    double norms[2];
    const LossKind kinds[2] = {LossKind::Mse, LossKind::Lmse};
    for (int which = 0; which < 2; ++which) {
      Tensor w = Tensor(w_star.shape(),
                        std::vector<double>(w_star.data().begin(),
                                            w_star.data().end()),
                        /*requires_grad=*/true);
      Tensor loss = kinds[which] == LossKind::Mse
                        ? mse(inst.y, matmul(inst.x, w))
                        : lmse(inst.y, matmul(inst.x, w), kLmseEps);
      loss.backward();
      norms[which] = max_abs(w.grad());
    }
    worst = std::max({worst, norms[0], norms[1]});
    if (norms[0] >= tol || norms[1] >= tol) ++report.violations;
  }
  report.worst = worst;
  report.pass = report.violations == 0;
  report.stats.push_back({"tol", tol});
  return report;
}

double taylor_partial_sum(double x, int n_terms, bool* diverged) {
  if (diverged) *diverged = !(x > 0.0 && x <= 2.0);
  const double u = x - 1.0;
  double sum = 0.0;
  double power = 1.0;
  for (int m = 1; m <= n_terms; ++m) {
    power *= -u;  // (-1)^m (x-1)^m
    sum += power / static_cast<double>(m);
  }
  return sum;
}

CheckReport check_taylor(int n_terms, double tol) {
  CheckReport report;
  report.name = "taylor";
  const double xs[] = {0.5, 0.75, 1.0, 1.25, 1.5};
  report.trials = static_cast<int>(std::size(xs));
  for (double x : xs) {
    const double err = std::fabs(taylor_partial_sum(x, n_terms) + std::log(x));
    report.worst = std::max(report.worst, err);
    report.stats.push_back({"err_at_" + std::to_string(x), err});
    if (err >= tol) ++report.violations;
  }
  report.pass = report.violations == 0;
  report.stats.push_back({"tol", tol});
  return report;
}

CheckReport check_gradients(LossKind kind, int samples, double h,
                            double fd_tol, double route_tol,
                            std::uint64_t seed) {
  if (kind != LossKind::Mse && kind != LossKind::Lmse) {
    throw ContractError("check_gradients: loss must be mse or lmse");
  }
  Xoshiro256ss rng(seed);
  CheckReport report;
  report.name = "gradients/" + to_string(kind);
  report.trials = samples;
  double worst_fd_analytic = 0.0;
  double worst_fd_autodiff = 0.0;
  double worst_route = 0.0;
  for (int trial = 0; trial < samples; ++trial) {
    const std::int64_t dim = 1 + static_cast<std::int64_t>(rng.below(8));
    Tensor y = random_tensor(rng, {dim}, 0.05, 0.95);
    Tensor pred = random_tensor(rng, {dim}, 0.05, 0.95);

    Tensor analytic = kind == LossKind::Mse ? grad_mse(y, pred)
                                            : grad_lmse(y, pred, kLmseEps);

    Tensor tracked(pred.shape(),
                   std::vector<double>(pred.data().begin(), pred.data().end()),
                   /*requires_grad=*/true);
    Tensor loss =
        kind == LossKind::Mse ? mse(y, tracked) : lmse(y, tracked, kLmseEps);
    loss.backward();
    auto autodiff = tracked.grad();

    bool violated = false;
    for (std::int64_t i = 0; i < dim; ++i) {
      Tensor plus(pred.shape(),
                  std::vector<double>(pred.data().begin(), pred.data().end()));
      Tensor minus(pred.shape(),
                   std::vector<double>(pred.data().begin(), pred.data().end()));
      plus.data()[i] += h;
      minus.data()[i] -= h;
      const double numeric =
          (loss_at(kind, y, plus) - loss_at(kind, y, minus)) / (2.0 * h);

      const double e_analytic = rel_err(analytic.data()[i], numeric);
      const double e_autodiff = rel_err(autodiff[i], numeric);
      const double e_route = rel_err(autodiff[i], analytic.data()[i]);
      worst_fd_analytic = std::max(worst_fd_analytic, e_analytic);
      worst_fd_autodiff = std::max(worst_fd_autodiff, e_autodiff);
      worst_route = std::max(worst_route, e_route);
      if (e_analytic > fd_tol || e_autodiff > fd_tol || e_route > route_tol) {
        violated = true;
      }
    }
    if (violated) ++report.violations;
  }
  report.worst = std::max(worst_fd_analytic, worst_fd_autodiff);
  report.pass = report.violations == 0;
  report.stats.push_back({"max_rel_fd_analytic", worst_fd_analytic});
  report.stats.push_back({"max_rel_fd_autodiff", worst_fd_autodiff});
  report.stats.push_back({"max_rel_routes", worst_route});
  report.stats.push_back({"fd_tol", fd_tol});
  report.stats.push_back({"route_tol", route_tol});
  return report;
}

std::vector<CheckReport> run_verify_suite(const std::string& suite,
                                          std::uint64_t seed) {
  std::vector<CheckReport> reports;
  const bool all = suite == "all";
  if (all || suite == "gradients") {
    reports.push_back(check_gradients(LossKind::Mse, kGradientSamples,
                                      kGradientStep, kGradientTolMse, kRouteTol,
                                      seed));
    reports.push_back(check_gradients(LossKind::Lmse, kGradientSamples,
                                      kGradientStep, kGradientTolLmse,
                                      kRouteTol, seed + 1));
  }
  if (all || suite == "convexity") {
    reports.push_back(
        check_convexity(LossKind::Mse, kConvexityTrials, kConvexityTol, seed));
    reports.push_back(check_convexity(LossKind::Lmse, kConvexityTrials,
                                      kConvexityTol, seed + 1));
  }
  if (all || suite == "closed-form") {
    reports.push_back(check_closed_form(kClosedFormInstances, kClosedFormTol, seed));
  }
  if (all || suite == "taylor") {
    reports.push_back(check_taylor(kTaylorTerms, kTaylorTol));
  }
  if (reports.empty()) {
    throw ContractError("unknown verify suite '" + suite +
                        "' (gradients|convexity|closed-form|taylor|all)");
  }
  return reports;
}

bool all_pass(const std::vector<CheckReport>& reports) {
  for (const CheckReport& r : reports) {
    if (!r.pass) return false;
  }
  return true;
}

void print_reports(const std::vector<CheckReport>& reports, std::ostream& out) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-20s %8s %10s %13s  %s", "check", "trials",
                "violations", "worst", "result");
  out << buf << '\n';
  for (const CheckReport& r : reports) {
    std::snprintf(buf, sizeof buf, "%-20s %8d %10d %13.3e  %s", r.name.c_str(),
                  r.trials, r.violations, r.worst,
                  r.pass ? "pass" : "FAIL");
    out << buf << '\n';
  }
}

std::string reports_to_json(const std::vector<CheckReport>& reports) {
  nlohmann::json doc = nlohmann::json::array();
  for (const CheckReport& r : reports) {
    nlohmann::json stats = nlohmann::json::object();
    for (const auto& [key, value] : r.stats) stats[key] = value;
    doc.push_back({{"name", r.name},
                   {"trials", r.trials},
                   {"violations", r.violations},
                   {"worst", r.worst},
                   {"pass", r.pass},
                   {"stats", stats}});
  }
  return doc.dump(2);
}

}  // namespace fliplog
