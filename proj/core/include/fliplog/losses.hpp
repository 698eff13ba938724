#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fliplog/tensor.hpp"

namespace fliplog {

enum class LossKind { Mse, Mae, Msle, Lmse, Fl };

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);

/// Loss selection plus the knobs shared by the log-scaled family. Reduction
/// is always the mean over all elements. `epsilon` keeps the log argument
/// positive and caps the loss at the finite ceiling -log(epsilon).
/// `scale_trick` selects the max-normalized FL variant.
struct LossSpec {
  LossKind kind = LossKind::Mse;
  LossKind fl_inner = LossKind::Mse;  // base loss when kind == Fl
  double epsilon = 1e-7;
  bool scale_trick = false;

  std::string name() const;
};

// Scalar losses. All are graph-aware: when an input tracks gradients the
// result carries a backward record built from primitive ops.

/// Mean of squared elementwise differences.
Tensor mse(const Tensor& y, const Tensor& yhat);

/// Mean absolute difference.
Tensor mae(const Tensor& y, const Tensor& yhat);

/// Mean of (ln(y+1) - ln(yhat+1))^2; every element must be > -1.
Tensor msle(const Tensor& y, const Tensor& yhat);

/// Log-scaled squared error: mean of -log(1 + epsilon - (y-yhat)^2).
/// Requires (y-yhat)^2 <= 1 elementwise, guaranteed for inputs in [0,1].
/// Values lie in [-log(1+epsilon), -log(epsilon)].
Tensor lmse(const Tensor& y, const Tensor& yhat, double epsilon = 1e-7);

/// Flip-and-log transform of non-negative per-element base loss values:
/// mean of -log(1 + epsilon - L). With scale_trick the bases are first
/// normalized to [0, 1-epsilon] by the batch maximum (an all-zero base maps
/// to zero), bounding the result by -log(epsilon) for any base magnitude;
/// the normalizer is treated as a constant by the backward pass.
Tensor fl_transform(const Tensor& base_values, double epsilon,
                    bool scale_trick);

/// Per-element base loss feeding fl_transform (squared error, absolute
/// error, or squared log1p difference).
Tensor per_element_base(LossKind inner, const Tensor& y, const Tensor& yhat);

/// Dispatch on a LossSpec.
Tensor loss_value(const LossSpec& spec, const Tensor& y, const Tensor& yhat);

// Analytic gradients with respect to yhat (independent of the autodiff
// path; the two routes are cross-checked in the verification suite).

/// Per-element (-2y + 2yhat) / N.
Tensor grad_mse(const Tensor& y, const Tensor& yhat);

/// Per-element (-2y + 2yhat) / (N * (1 + epsilon - (y-yhat)^2)).
Tensor grad_lmse(const Tensor& y, const Tensor& yhat, double epsilon = 1e-7);

enum class SurfaceQuantity { Loss, Gradient };

/// Loss or gradient values sampled on a uniform (y, yhat) grid over [0,1]^2,
/// with optional symmetric clipping of extreme cells.
struct SurfaceGrid {
  LossKind kind = LossKind::Mse;
  SurfaceQuantity quantity = SurfaceQuantity::Loss;
  double epsilon = 0.0;
  std::optional<double> clip;
  std::vector<double> axis;          // shared y / yhat axis values
  std::vector<double> z;             // row-major, z[i*res + j] at (axis[i], axis[j])
  std::vector<std::uint8_t> clipped; // 1 where |z| exceeded the clip threshold

  int resolution() const { return static_cast<int>(axis.size()); }
};

/// Samples a loss/gradient surface at `resolution` points per axis
/// (resolution >= 2). Cells with |z| > clip are replaced by sign(z)*clip and
/// flagged.
SurfaceGrid surface_grid(LossKind kind, SurfaceQuantity quantity,
                         int resolution, std::optional<double> clip,
                         double epsilon = 1e-7);

/// CSV rows `y,yhat,z,clipped` with 17-significant-digit floats.
void write_surface_csv(const SurfaceGrid& grid, std::ostream& out);
void write_surface_csv(const SurfaceGrid& grid, const std::string& path);

}  // namespace fliplog
