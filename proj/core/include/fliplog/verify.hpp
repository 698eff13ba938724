#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "fliplog/losses.hpp"
#include "fliplog/rng.hpp"
#include "fliplog/tensor.hpp"

namespace fliplog {

/// Outcome of one numeric check: sampled trials, observed violations and the
/// worst residual against the check's tolerance.
struct CheckReport {
  std::string name;
  int trials = 0;
  int violations = 0;
  double worst = 0.0;
  bool pass = false;
  std::vector<std::pair<std::string, double>> stats;
};

/// Linear least-squares instance Y ~ X W used by the convexity and
/// closed-form checks. X is regenerated until cond(X^T X) < 1e6. When
/// `realizable`, Y equals X * w_true exactly, so the least-squares optimum
/// has zero residual and sits inside the log-domain trivially.
struct LinearInstance {
  Tensor x;       // [n, f]
  Tensor y;       // [n, k]
  Tensor w_true;  // [f, k]
};

LinearInstance make_linear_instance(Xoshiro256ss& rng, int n, int f, int k,
                                    bool realizable);

/// Condition number of the gram matrix X^T X (Jacobi eigensolver).
double gram_condition(const Tensor& x);

/// Solves X^T X W = X^T Y by Cholesky factorization of the gram matrix.
Tensor solve_normal_equations(const Tensor& x, const Tensor& y);

/// Jensen-inequality sampling: for random in-domain instances and weight
/// pairs W1, W2, checks L(l*W1 + (1-l)*W2) <= l*L(W1) + (1-l)*L(W2) + tol at
/// l in {0.25, 0.5, 0.75}. Residuals are kept inside |r| <= 0.9 so the
/// log-scaled loss is well-conditioned.
CheckReport check_convexity(LossKind kind, int trials, double tol,
                            std::uint64_t seed);

/// Solves the normal equations on realizable instances and checks that the
/// gradient infinity-norms of both MSE and the log-scaled loss vanish at the
/// solution (shared stationary point).
CheckReport check_closed_form(int instances, double tol, std::uint64_t seed);

/// Partial sum of the alternating series for -log(x) around x = 1:
/// sum_{m=1..n_terms} (-1)^m (x-1)^m / m. Sets *diverged when x lies outside
/// the convergence interval (0, 2].
double taylor_partial_sum(double x, int n_terms, bool* diverged = nullptr);

CheckReport check_taylor(int n_terms, double tol);

/// Compares the analytic gradient and the autodiff backward pass against
/// central finite differences (step h) on random points in [0.05, 0.95]^d,
/// and the two analytic routes against each other at route_tol.
CheckReport check_gradients(LossKind kind, int samples, double h,
                            double fd_tol, double route_tol,
                            std::uint64_t seed);

/// Runs a named suite ("gradients", "convexity", "closed-form", "taylor" or
/// "all") at the pinned tolerances.
std::vector<CheckReport> run_verify_suite(const std::string& suite,
                                          std::uint64_t seed);

bool all_pass(const std::vector<CheckReport>& reports);
void print_reports(const std::vector<CheckReport>& reports, std::ostream& out);
std::string reports_to_json(const std::vector<CheckReport>& reports);

}  // namespace fliplog
